#include "vvmc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vvmc/kernels.hpp"

namespace vvmc {

int pad_up(int v, int m) { return ((v + m - 1) / m) * m; }

namespace {
constexpr std::size_t kCdfCacheCap = 1u << 16;

struct PassSpec {
  bool masked = false;   // false: every position in one pass
  bool anchors = false;  // when masked, which parity this pass covers
};

std::vector<PassSpec> pass_schedule(bool checkerboard) {
  if (checkerboard) return {{true, true}, {true, false}};
  return {{false, false}};
}

// canonical in-pass order: channel-major, then raster over masked positions
template <class Fn>
void for_each_pos(int ck, int h, int w, const PassSpec& ps, Fn&& fn) {
  for (int c = 0; c < ck; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (ps.masked && (((y + x) % 2 == 0) != ps.anchors)) continue;
        fn(c, y, x);
      }
}

int clamp_symbol(double r) {
  if (r > 32767.0) return 32767;
  if (r < -32768.0) return -32768;
  return static_cast<int>(r);
}

// anchors of group channels [c0,c1) with everything else zeroed
Tensor masked_anchors(const Tensor& yhat, int c0, int c1, int h, int w) {
  Tensor out({c1 - c0, h, w});
  for (int c = c0; c < c1; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if ((y + x) % 2 == 0) out.at3(c - c0, y, x) = yhat.at3(c, y, x);
  return out;
}

Tensor decoded_prefix(const Tensor& yhat, int c0, int h, int w) {
  Tensor prev({c0, h, w});
  std::copy(yhat.data.begin(),
            yhat.data.begin() + static_cast<std::size_t>(c0) * h * w,
            prev.data.begin());
  return prev;
}

struct SlicePriors {
  Var lf;  // null when auxiliary off
  AuxAnalysis aux;
  Var psi;
};

// shared decoder-visible context: auxiliary latents from the buffer and the
// hyper features for this slice
SlicePriors make_priors(const Model& m, const VarMap& p, const Tensor& buffer,
                        const Tensor& zhat, int lh, int lw) {
  SlicePriors pr;
  if (m.cfg.use_auxiliary) {
    pr.aux = m.f_a(p, make_const(buffer));
    pr.lf = pr.aux.lf;
  }
  Var psi_full = m.h_s(p, make_const(zhat));
  pr.psi = crop_spatial(psi_full, lh, lw);
  return pr;
}

Model::Theta group_pass_theta(const Model& m, const VarMap& p, int k,
                              const PassSpec& ps, const Tensor& yhat, int c0,
                              int c1, const SlicePriors& pr, int lh, int lw) {
  Var phi_sp, phi_ch;
  if (m.cfg.use_checkerboard) {
    if (ps.masked && !ps.anchors)
      phi_sp = m.spatial_ctx(p, k, make_const(masked_anchors(yhat, c0, c1, lh, lw)));
    else
      phi_sp = m.zero_ctx(lh, lw);
  }
  if (m.cfg.use_channel_ctx) {
    if (k == 0)
      phi_ch = m.zero_ctx(lh, lw);
    else
      phi_ch = m.channel_ctx(p, k, make_const(decoded_prefix(yhat, c0, lh, lw)));
  }
  return m.entropy_params(p, k, phi_sp, phi_ch, pr.lf, pr.psi);
}

struct ZDims {
  int h = 0, w = 0;
};
ZDims z_dims(int lh, int lw) {
  ZDims d;
  d.h = kernels::conv_out_dim(kernels::conv_out_dim(lh, 5, 2, 2), 5, 2, 2);
  d.w = kernels::conv_out_dim(kernels::conv_out_dim(lw, 5, 2, 2), 5, 2, 2);
  return d;
}

}  // namespace

CodecSession::CodecSession(const Model& m, int h, int w)
    : model(&m),
      pvars(m.vars(false)),
      buffer(m.initial_buffer(h, w)),
      padded_h(h),
      padded_w(w) {
  if (h % 16 || w % 16)
    throw std::invalid_argument("codec session: dims must be padded to 16");
  auto probs = m.fp_symbol_probs(kDefaultTail);
  z_tables.reserve(probs.size());
  for (auto& pr : probs)
    z_tables.push_back(CdfTable::from_probabilities(pr, kDefaultTail));
}

void CodecSession::reset_group() {
  buffer = model->initial_buffer(padded_h, padded_w);
  slice_index = 0;
}

SliceChunk encode_slice(const Tensor& x, CodecSession& s, SliceStats* stats) {
  const Model& m = *s.model;
  const ModelConfig& cfg = m.cfg;
  const VarMap& p = s.pvars;
  if (x.dim(0) != 1 || x.dim(1) != s.padded_h || x.dim(2) != s.padded_w)
    throw std::invalid_argument("encode_slice: input shape " +
                                shape_str(x.shape));
  if (s.cdf_cache.size() > kCdfCacheCap) s.cdf_cache = CdfCache();

  Var xv = make_const(x);
  AuxAnalysis aux;
  Var lf;
  if (cfg.use_auxiliary) {
    aux = m.f_a(p, make_const(s.buffer));
    lf = aux.lf;
  }
  Var y = m.g_a(p, xv, cfg.use_auxiliary ? &aux : nullptr);
  Var z = m.h_a(p, y);

  // hyper path: symbols round(z), channel-major raster order
  QuantizedEval zq = quantize_eval(z->value, Tensor(z->value.shape));
  const int zh = z->value.dim(1), zw = z->value.dim(2);
  SliceChunk chunk;
  {
    RangeEncoder zenc;
    for (int c = 0; c < cfg.hyper_channels; ++c)
      for (int i = 0; i < zh * zw; ++i)
        zenc.encode_symbol(s.z_tables[c],
                           zq.symbols[static_cast<std::size_t>(c) * zh * zw + i]);
    chunk.z_bytes = zenc.finish();
  }

  const int lh = y->value.dim(1), lw = y->value.dim(2);
  SlicePriors pr;
  pr.aux = aux;
  pr.lf = lf;
  pr.psi = crop_spatial(m.h_s(p, make_const(zq.yhat)), lh, lw);

  auto plan = ChannelSlicePlan::even(cfg.latent_channels, cfg.groups);
  Tensor yhat(y->value.shape);
  std::vector<int> symbols;
  std::vector<const CdfTable*> tables;
  symbols.reserve(y->value.numel());
  tables.reserve(y->value.numel());

  for (int k = 0; k < cfg.groups; ++k) {
    auto [c0, c1] = plan.ranges[k];
    int ck = c1 - c0;
    for (const PassSpec& ps : pass_schedule(cfg.use_checkerboard)) {
      Model::Theta th = group_pass_theta(m, p, k, ps, yhat, c0, c1, pr, lh, lw);
      const Tensor& mu = th.mu->value;
      const Tensor& sg = th.sigma->value;
      for_each_pos(ck, lh, lw, ps, [&](int c, int yy, int xx) {
        std::size_t li = (static_cast<std::size_t>(c0 + c) * lh + yy) * lw + xx;
        std::size_t ti = (static_cast<std::size_t>(c) * lh + yy) * lw + xx;
        int sym = clamp_symbol(std::round(y->value.data[li] - mu.data[ti]));
        yhat.data[li] = sym + mu.data[ti];
        symbols.push_back(sym);
        tables.push_back(s.cdf_cache.get_gaussian(sg.data[ti]));
      });
    }
  }
  chunk.y_bytes = rc_encode(symbols, tables);

  // run the decoder-side synthesis so the buffer stays in lockstep
  Var yhat_v = make_const(yhat);
  AuxSynthesis syn;
  Var mx;
  if (cfg.use_auxiliary) {
    syn = m.f_s(p, lf);
    mx = m.g_s(p, yhat_v, &syn);
  } else {
    mx = m.g_s(p, yhat_v, nullptr);
  }
  Var ft = m.fuse(p, mx, syn.mf);
  s.buffer = ft->value;
  s.slice_index++;

  if (stats) {
    stats->y_bits = 8.0 * static_cast<double>(chunk.y_bytes.size());
    stats->z_bits = 8.0 * static_cast<double>(chunk.z_bytes.size());
    stats->bpp = stats->total_bits() /
                 (static_cast<double>(s.padded_h) * s.padded_w);
  }
  return chunk;
}

DecodedSlice decode_slice(const SliceChunk& chunk, CodecSession& s,
                          bool features_only) {
  const Model& m = *s.model;
  const ModelConfig& cfg = m.cfg;
  const VarMap& p = s.pvars;
  if (s.cdf_cache.size() > kCdfCacheCap) s.cdf_cache = CdfCache();

  const int lh = s.padded_h / 16, lw = s.padded_w / 16;
  ZDims zd = z_dims(lh, lw);

  Tensor zhat({cfg.hyper_channels, zd.h, zd.w});
  {
    RangeDecoder zdec(chunk.z_bytes);
    for (int c = 0; c < cfg.hyper_channels; ++c)
      for (int i = 0; i < zd.h * zd.w; ++i)
        zhat.data[static_cast<std::size_t>(c) * zd.h * zd.w + i] =
            static_cast<double>(zdec.decode_symbol(s.z_tables[c]));
  }

  SlicePriors pr = make_priors(m, p, s.buffer, zhat, lh, lw);
  auto plan = ChannelSlicePlan::even(cfg.latent_channels, cfg.groups);
  Tensor yhat({cfg.latent_channels, lh, lw});
  RangeDecoder ydec(chunk.y_bytes);

  for (int k = 0; k < cfg.groups; ++k) {
    auto [c0, c1] = plan.ranges[k];
    int ck = c1 - c0;
    for (const PassSpec& ps : pass_schedule(cfg.use_checkerboard)) {
      Model::Theta th = group_pass_theta(m, p, k, ps, yhat, c0, c1, pr, lh, lw);
      const Tensor& mu = th.mu->value;
      const Tensor& sg = th.sigma->value;
      for_each_pos(ck, lh, lw, ps, [&](int c, int yy, int xx) {
        std::size_t li = (static_cast<std::size_t>(c0 + c) * lh + yy) * lw + xx;
        std::size_t ti = (static_cast<std::size_t>(c) * lh + yy) * lw + xx;
        const CdfTable* table = s.cdf_cache.get_gaussian(sg.data[ti]);
        int sym = ydec.decode_symbol(*table);
        yhat.data[li] = sym + mu.data[ti];
      });
    }
  }

  DecodedSlice out;
  out.y_hat = yhat;
  Var yhat_v = make_const(yhat);
  AuxSynthesis syn;
  Var mx;
  if (cfg.use_auxiliary) {
    syn = m.f_s(p, pr.lf);
    mx = m.g_s(p, yhat_v, &syn);
  } else {
    mx = m.g_s(p, yhat_v, nullptr);
  }
  Var ft = m.fuse(p, mx, syn.mf);
  out.m_x = mx->value;
  out.f_t = ft->value;
  if (!features_only) out.x_hat = m.reconstruct(p, ft)->value;

  s.buffer = ft->value;
  s.slice_index++;
  return out;
}

Tensor decode_latents_serial_reference(const SliceChunk& chunk,
                                       const CodecSession& s) {
  const Model& m = *s.model;
  const ModelConfig& cfg = m.cfg;
  const VarMap& p = s.pvars;
  const int lh = s.padded_h / 16, lw = s.padded_w / 16;
  ZDims zd = z_dims(lh, lw);

  Tensor zhat({cfg.hyper_channels, zd.h, zd.w});
  {
    RangeDecoder zdec(chunk.z_bytes);
    for (int c = 0; c < cfg.hyper_channels; ++c)
      for (int i = 0; i < zd.h * zd.w; ++i)
        zhat.data[static_cast<std::size_t>(c) * zd.h * zd.w + i] =
            static_cast<double>(zdec.decode_symbol(s.z_tables[c]));
  }

  SlicePriors pr = make_priors(m, p, s.buffer, zhat, lh, lw);
  auto plan = ChannelSlicePlan::even(cfg.latent_channels, cfg.groups);
  Tensor yhat({cfg.latent_channels, lh, lw});
  RangeDecoder ydec(chunk.y_bytes);
  CdfCache cache;

  for (int k = 0; k < cfg.groups; ++k) {
    auto [c0, c1] = plan.ranges[k];
    int ck = c1 - c0;
    for (const PassSpec& ps : pass_schedule(cfg.use_checkerboard)) {
      for_each_pos(ck, lh, lw, ps, [&](int c, int yy, int xx) {
        // re-derive the parameters from this symbol's conditioning set only
        Model::Theta th =
            group_pass_theta(m, p, k, ps, yhat, c0, c1, pr, lh, lw);
        std::size_t li = (static_cast<std::size_t>(c0 + c) * lh + yy) * lw + xx;
        std::size_t ti = (static_cast<std::size_t>(c) * lh + yy) * lw + xx;
        const CdfTable* table = cache.get_gaussian(th.sigma->value.data[ti]);
        int sym = ydec.decode_symbol(*table);
        yhat.data[li] = sym + th.mu->value.data[ti];
      });
    }
  }
  return yhat;
}

// ---------------------------------------------------------------------------

BitstreamContainer encode_volume(const Volume& v, const Model& m,
                                 int gop_stride, EncodeStats* stats) {
  v.validate();
  if (gop_stride < 1)
    throw std::invalid_argument("encode_volume: gop_stride >= 1");
  auto slices = normalize(v);
  std::vector<Tensor> padded;
  CropRecord rec{v.height, v.width};
  for (const auto& sl : slices) {
    auto [pt, r] = pad_to_multiple(sl, 16);
    padded.push_back(std::move(pt));
    rec = r;
  }
  auto groups = group_slices(padded, gop_stride, rec);

  BitstreamContainer c;
  c.width = v.width;
  c.height = v.height;
  c.depth = v.depth;
  c.bit_depth = v.bit_depth;
  c.gop_stride = gop_stride;
  c.model_id = m.model_id();
  c.groups = m.cfg.groups;
  c.latent_channels = m.cfg.latent_channels;
  c.use_checkerboard = m.cfg.use_checkerboard;
  c.use_channel_ctx = m.cfg.use_channel_ctx;
  c.use_auxiliary = m.cfg.use_auxiliary;

  CodecSession session(m, pad_up(v.height, 16), pad_up(v.width, 16));
  for (const auto& g : groups) {
    session.reset_group();
    for (const auto& sl : g.slices) {
      SliceStats st;
      c.chunks.push_back(encode_slice(sl, session, &st));
      if (stats) stats->slices.push_back(st);
    }
  }
  return c;
}

namespace {
void check_compat(const BitstreamContainer& c, const Model& m) {
  if (c.model_id != m.model_id())
    throw CompatibilityError("decode: container model_id does not match checkpoint");
  if (c.groups != m.cfg.groups || c.latent_channels != m.cfg.latent_channels ||
      c.use_checkerboard != m.cfg.use_checkerboard ||
      c.use_channel_ctx != m.cfg.use_channel_ctx ||
      c.use_auxiliary != m.cfg.use_auxiliary)
    throw CompatibilityError("decode: container/checkpoint configuration mismatch");
}
}  // namespace

Volume decode_volume(const BitstreamContainer& c, const Model& m,
                     std::vector<Tensor>* features) {
  check_compat(c, m);
  Volume out;
  out.width = c.width;
  out.height = c.height;
  out.depth = c.depth;
  out.bit_depth = c.bit_depth;
  out.samples.resize(out.numel());

  CropRecord rec{c.height, c.width};
  CodecSession session(m, pad_up(c.height, 16), pad_up(c.width, 16));
  for (int i = 0; i < c.depth; ++i) {
    if (i % c.gop_stride == 0) session.reset_group();
    DecodedSlice d = decode_slice(c.chunks[i], session, false);
    Tensor cropped = crop_slice(d.x_hat, rec);
    auto samples = denormalize(cropped, c.bit_depth);
    std::copy(samples.begin(), samples.end(),
              out.samples.begin() + static_cast<std::size_t>(i) * c.height * c.width);
    if (features) features->push_back(d.m_x);
  }
  return out;
}

std::vector<Tensor> decode_features(const BitstreamContainer& c, const Model& m) {
  check_compat(c, m);
  std::vector<Tensor> features;
  CodecSession session(m, pad_up(c.height, 16), pad_up(c.width, 16));
  for (int i = 0; i < c.depth; ++i) {
    if (i % c.gop_stride == 0) session.reset_group();
    DecodedSlice d = decode_slice(c.chunks[i], session, true);
    features.push_back(d.m_x);
  }
  return features;
}

}  // namespace vvmc
