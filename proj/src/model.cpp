#include "vvmc/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

#include "vvmc/volume.hpp"

namespace vvmc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// ParamStore / VarMap / layers

Tensor& ParamStore::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::out_of_range("param missing: " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw std::out_of_range("param missing: " + name);
  return it->second;
}

void ParamStore::put(const std::string& name, Tensor t) {
  if (!tensors.emplace(name, std::move(t)).second)
    throw std::logic_error("duplicate param: " + name);
}

VarMap VarMap::from(const ParamStore& p, bool requires_grad) {
  VarMap m;
  for (const auto& [name, t] : p.tensors)
    m.vars.emplace(name, make_leaf(t, requires_grad));
  return m;
}

const Var& VarMap::at(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw std::out_of_range("var missing: " + name);
  return it->second;
}

namespace {
Tensor conv_weight_init(std::vector<int> shape, int fan_in, double gain,
                        Rng& rng) {
  Tensor w(std::move(shape));
  double std = gain * std::sqrt(1.0 / fan_in);
  for (double& v : w.data) v = std * rng.normal();
  return w;
}
}  // namespace

void Conv2dLayer::init(ParamStore& p, Rng& rng) const {
  p.put(name + ".w", conv_weight_init({cout, cin, k, k}, cin * k * k, gain, rng));
  p.put(name + ".b", Tensor({cout}));
}

Var Conv2dLayer::operator()(const VarMap& p, const Var& x) const {
  return conv2d(x, p.at(name + ".w"), p.at(name + ".b"), stride, pad);
}

void ConvT2dLayer::init(ParamStore& p, Rng& rng) const {
  p.put(name + ".w",
        conv_weight_init({cin, cout, k, k}, cin * k * k, gain, rng));
  p.put(name + ".b", Tensor({cout}));
}

Var ConvT2dLayer::operator()(const VarMap& p, const Var& x) const {
  return convt2d(x, p.at(name + ".w"), p.at(name + ".b"), stride, pad, opad);
}

void GdnLayer::init(ParamStore& p, Rng& rng) const {
  (void)rng;
  p.put(name + ".beta_raw", Tensor({channels}, 1.0));
  Tensor g({channels, channels});
  double diag = std::sqrt(0.1);
  for (int i = 0; i < channels; ++i)
    g.data[static_cast<std::size_t>(i) * channels + i] = diag;
  p.put(name + ".gamma_raw", std::move(g));
}

Var GdnLayer::operator()(const VarMap& p, const Var& x) const {
  Var beta = add_scalar(square(p.at(name + ".beta_raw")), 1e-6);
  Var gamma = square(p.at(name + ".gamma_raw"));
  return gdn(x, beta, gamma, inverse);
}

void ResBlock::init(ParamStore& p, Rng& rng) const {
  Conv2dLayer(name + ".c1", channels, channels, 3, 1).init(p, rng);
  Conv2dLayer(name + ".c2", channels, channels, 3, 1).init(p, rng);
}

Var ResBlock::operator()(const VarMap& p, const Var& x) const {
  Var t = conv2d(x, p.at(name + ".c1.w"), p.at(name + ".c1.b"), 1, 1);
  t = gelu(t);
  t = conv2d(t, p.at(name + ".c2.w"), p.at(name + ".c2.b"), 1, 1);
  return add(x, t);
}

void SubpixelUp::init(ParamStore& p, Rng& rng) const {
  Conv2dLayer(name + ".c", cin, cout * r * r, 3, 1, gain).init(p, rng);
}

Var SubpixelUp::operator()(const VarMap& p, const Var& x) const {
  Var t = conv2d(x, p.at(name + ".c.w"), p.at(name + ".c.b"), 1, 1);
  return pixel_shuffle(t, r);
}

// ---------------------------------------------------------------------------
// ModelConfig

ModelConfig ModelConfig::paper() { return ModelConfig{}; }

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.latent_channels = 32;
  c.hyper_channels = 32;
  c.buffer_channels = 16;
  c.aux_enc_channels = 6;
  c.aux_dec_channels = 6;
  c.aux_latent_channels = 12;
  c.recon_channels = 6;
  c.groups = 4;
  c.res_blocks = 1;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.latent_channels = 8;
  c.hyper_channels = 8;
  c.buffer_channels = 4;
  c.aux_enc_channels = 3;
  c.aux_dec_channels = 3;
  c.aux_latent_channels = 4;
  c.recon_channels = 4;
  c.groups = 2;
  c.res_blocks = 1;
  return c;
}

void ModelConfig::validate() const {
  if (latent_channels < 1 || hyper_channels < 1 || buffer_channels < 1)
    throw std::invalid_argument("model config: channel widths must be >= 1");
  if (groups < 1 || latent_channels % groups != 0)
    throw std::invalid_argument(
        "model config: groups must evenly divide latent channels");
  if (res_blocks < 0 || res_blocks > 4)
    throw std::invalid_argument("model config: res_blocks out of range");
}

std::string ModelConfig::to_json() const {
  json j;
  j["latent_channels"] = latent_channels;
  j["hyper_channels"] = hyper_channels;
  j["buffer_channels"] = buffer_channels;
  j["aux_enc_channels"] = aux_enc_channels;
  j["aux_dec_channels"] = aux_dec_channels;
  j["aux_latent_channels"] = aux_latent_channels;
  j["recon_channels"] = recon_channels;
  j["groups"] = groups;
  j["res_blocks"] = res_blocks;
  j["use_checkerboard"] = use_checkerboard;
  j["use_channel_ctx"] = use_channel_ctx;
  j["use_auxiliary"] = use_auxiliary;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& s) {
  json j = json::parse(s);
  ModelConfig c;
  c.latent_channels = j.at("latent_channels").get<int>();
  c.hyper_channels = j.at("hyper_channels").get<int>();
  c.buffer_channels = j.at("buffer_channels").get<int>();
  c.aux_enc_channels = j.at("aux_enc_channels").get<int>();
  c.aux_dec_channels = j.at("aux_dec_channels").get<int>();
  c.aux_latent_channels = j.at("aux_latent_channels").get<int>();
  c.recon_channels = j.at("recon_channels").get<int>();
  c.groups = j.at("groups").get<int>();
  c.res_blocks = j.at("res_blocks").get<int>();
  c.use_checkerboard = j.at("use_checkerboard").get<bool>();
  c.use_channel_ctx = j.at("use_channel_ctx").get<bool>();
  c.use_auxiliary = j.at("use_auxiliary").get<bool>();
  c.validate();
  return c;
}

int ModelConfig::ep_in_channels(int k) const {
  (void)k;
  int in = 2 * latent_channels;  // hyper features
  if (use_checkerboard) in += ctx_channels();
  if (use_channel_ctx) in += ctx_channels();
  if (use_auxiliary) in += aux_latent_channels;
  return in;
}

// ---------------------------------------------------------------------------
// Arch

Arch::Arch(const ModelConfig& c) : cfg(c) {
  c.validate();
  const int m = c.latent_channels, n = c.hyper_channels, f = c.buffer_channels;
  const int ce = c.aux_enc_channels, cd = c.aux_dec_channels;
  const int cl = c.aux_latent_channels, cr = c.recon_channels;
  const int e = c.use_auxiliary ? ce : 0;
  const int d = c.use_auxiliary ? cd : 0;

  // gain 2 on the strided backbone keeps the latent scale away from the
  // all-zero quantizer fixpoint at init; the fusion gate stays cool so its
  // tanh/sigmoid start unsaturated
  ga_conv[0] = Conv2dLayer("ga.conv1", 1, m, 5, 2, 2.0);
  ga_conv[1] = Conv2dLayer("ga.conv2", m + e, m, 5, 2, 2.0);
  ga_conv[2] = Conv2dLayer("ga.conv3", m + e, m, 5, 2, 2.0);
  ga_conv[3] = Conv2dLayer("ga.conv4", m + e, m, 5, 2, 2.0);
  for (int i = 0; i < 3; ++i) {
    ga_gdn[i] = GdnLayer("ga.gdn" + std::to_string(i + 1), m, false);
    for (int r = 0; r < c.res_blocks; ++r)
      ga_res[i].push_back(ResBlock(
          "ga.res" + std::to_string(i + 1) + "_" + std::to_string(r + 1), m));
  }

  gs_up[0] = ConvT2dLayer("gs.up1", m, m, 5, 2, 2.0);
  gs_up[1] = ConvT2dLayer("gs.up2", m + d, m, 5, 2, 2.0);
  gs_up[2] = ConvT2dLayer("gs.up3", m + d, m, 5, 2, 2.0);
  for (int i = 0; i < 3; ++i) {
    gs_igdn[i] = GdnLayer("gs.igdn" + std::to_string(i + 1), m, true);
    for (int r = 0; r < c.res_blocks; ++r)
      gs_res[i].push_back(ResBlock(
          "gs.res" + std::to_string(i + 1) + "_" + std::to_string(r + 1), m));
  }
  gs_final = SubpixelUp("gs.final", m, f, 2);

  ha_conv[0] = Conv2dLayer("ha.conv1", m, n, 3, 1, 2.0);
  ha_conv[1] = Conv2dLayer("ha.conv2", n, n, 5, 2, 2.0);
  ha_conv[2] = Conv2dLayer("ha.conv3", n, n, 5, 2, 2.0);

  hs_up[0] = ConvT2dLayer("hs.up1", n, n, 5, 2, 2.0);
  hs_up[1] = ConvT2dLayer("hs.up2", n, n + n / 2, 5, 2, 2.0);
  hs_out = Conv2dLayer("hs.out", n + n / 2, 2 * m, 3, 1);

  fa_step[0] = Conv2dLayer("fa.step1", f, ce, 3, 2, 2.0);
  fa_step[1] = Conv2dLayer("fa.step2", ce, ce, 3, 2, 2.0);
  fa_step[2] = Conv2dLayer("fa.step3", ce, ce, 3, 2, 2.0);
  fa_step[3] = Conv2dLayer("fa.step4", ce, cl, 3, 2, 2.0);
  fa_res[0] = ResBlock("fa.res1", ce);
  fa_res[1] = ResBlock("fa.res2", ce);
  fa_res[2] = ResBlock("fa.res3", ce);
  fa_res[3] = ResBlock("fa.res4", cl);

  fs_up[0] = ConvT2dLayer("fs.up1", cl, cd, 5, 2, 2.0);
  fs_up[1] = ConvT2dLayer("fs.up2", cd, cd, 5, 2, 2.0);
  fs_sub[0] = SubpixelUp("fs.sub3", cd, cd, 2);
  fs_sub[1] = SubpixelUp("fs.sub4", cd, f, 2);
  fs_res[0] = ResBlock("fs.res1", cd);
  fs_res[1] = ResBlock("fs.res2", cd);
  fs_res[2] = ResBlock("fs.res3", cd);

  const int fuse_in = c.use_auxiliary ? 2 * f : f;
  fuse_gate = Conv2dLayer("fuse.gate", fuse_in, f, 3, 1, 0.5);
  fuse_cand = Conv2dLayer("fuse.cand", fuse_in, f, 3, 1, 0.5);

  rec_conv[0] = Conv2dLayer("rec.conv1", f, cr, 3, 1);
  rec_conv[1] = Conv2dLayer("rec.conv2", cr, cr, 3, 1);
  rec_conv[2] = Conv2dLayer("rec.conv3", cr, 1, 3, 1);

  const int ck = c.group_channels(), cc = c.ctx_channels();
  for (int k = 0; k < c.groups; ++k) {
    std::string kk = std::to_string(k + 1);
    if (c.use_checkerboard)
      sp.push_back(Conv2dLayer("ctx.sp" + kk, ck, cc, 5, 1));
    if (c.use_channel_ctx)
      ch.push_back(k == 0 ? Conv2dLayer()
                          : Conv2dLayer("ctx.ch" + kk, k * ck, cc, 3, 1));
    int in = c.ep_in_channels(k);
    int a = std::max(4 * ck, (2 * in + 2 * ck) / 3);
    int b = std::max(2 * ck, (in + 4 * ck) / 3);
    ep1.push_back(Conv2dLayer("ep" + kk + ".c1", in, a, 1, 1));
    ep2.push_back(Conv2dLayer("ep" + kk + ".c2", a, b, 1, 1));
    ep3.push_back(Conv2dLayer("ep" + kk + ".c3", b, 2 * ck, 1, 1));
  }
}

void Arch::init_all(ParamStore& p, Rng& rng) const {
  for (int i = 0; i < 4; ++i) ga_conv[i].init(p, rng);
  for (int i = 0; i < 3; ++i) {
    ga_gdn[i].init(p, rng);
    for (const auto& r : ga_res[i]) r.init(p, rng);
  }
  for (int i = 0; i < 3; ++i) {
    gs_up[i].init(p, rng);
    gs_igdn[i].init(p, rng);
    for (const auto& r : gs_res[i]) r.init(p, rng);
  }
  gs_final.init(p, rng);
  for (int i = 0; i < 3; ++i) ha_conv[i].init(p, rng);
  for (int i = 0; i < 2; ++i) hs_up[i].init(p, rng);
  hs_out.init(p, rng);
  if (cfg.use_auxiliary) {
    for (int i = 0; i < 4; ++i) {
      fa_step[i].init(p, rng);
      fa_res[i].init(p, rng);
    }
    for (int i = 0; i < 2; ++i) fs_up[i].init(p, rng);
    for (int i = 0; i < 2; ++i) fs_sub[i].init(p, rng);
    for (int i = 0; i < 3; ++i) fs_res[i].init(p, rng);
  }
  fuse_gate.init(p, rng);
  fuse_cand.init(p, rng);
  for (int i = 0; i < 3; ++i) rec_conv[i].init(p, rng);
  for (const auto& l : sp) l.init(p, rng);
  for (const auto& l : ch)
    if (!l.name.empty()) l.init(p, rng);
  for (int k = 0; k < cfg.groups; ++k) {
    ep1[k].init(p, rng);
    ep2[k].init(p, rng);
    ep3[k].init(p, rng);
  }

  // factorized prior, filter widths (1,3,3,3,1)
  const int n = cfg.hyper_channels;
  const int dims[5] = {1, 3, 3, 3, 1};
  const double scale = std::pow(10.0, 0.25);
  for (int l = 0; l < 4; ++l) {
    double hinit = std::log(std::expm1(1.0 / (scale * dims[l + 1])));
    p.put("fp.h" + std::to_string(l), Tensor({n, dims[l + 1], dims[l]}, hinit));
    Tensor b({n * dims[l + 1]});
    for (double& v : b.data) v = rng.uniform(-0.5, 0.5);
    p.put("fp.b" + std::to_string(l), std::move(b));
    if (l < 3) p.put("fp.a" + std::to_string(l), Tensor({n * dims[l + 1]}));
  }
}

// ---------------------------------------------------------------------------
// Model

namespace instrumentation {
std::atomic<std::uint64_t> reconstruct_calls{0};
}

Model Model::init(const ModelConfig& cfg, std::uint64_t seed) {
  Model m;
  m.cfg = cfg;
  Rng rng(seed);
  Arch arch(cfg);
  arch.init_all(m.params, rng);
  return m;
}

AuxAnalysis Model::f_a(const VarMap& p, const Var& f_prev) const {
  Arch a(cfg);
  AuxAnalysis out;
  Var t = f_prev;
  Var* taps[4] = {&out.e1, &out.e2, &out.e3, &out.lf};
  for (int i = 0; i < 4; ++i) {
    t = a.fa_res[i](p, gelu(a.fa_step[i](p, t)));
    *taps[i] = t;
  }
  return out;
}

Var Model::g_a(const VarMap& p, const Var& x, const AuxAnalysis* aux) const {
  Arch a(cfg);
  if (cfg.use_auxiliary && !aux)
    throw std::invalid_argument("g_a: auxiliary contexts required");
  Var t = x;
  const Var* es[3] = {nullptr, nullptr, nullptr};
  if (cfg.use_auxiliary) {
    es[0] = &aux->e1;
    es[1] = &aux->e2;
    es[2] = &aux->e3;
  }
  for (int i = 0; i < 3; ++i) {
    t = a.ga_conv[i](p, t);
    t = a.ga_gdn[i](p, t);
    for (const auto& r : a.ga_res[i]) t = r(p, t);
    if (es[i]) t = concat_ch({t, *es[i]});
  }
  return a.ga_conv[3](p, t);
}

Var Model::h_a(const VarMap& p, const Var& y) const {
  Arch a(cfg);
  Var t = gelu(a.ha_conv[0](p, y));
  t = gelu(a.ha_conv[1](p, t));
  return a.ha_conv[2](p, t);
}

Var Model::h_s(const VarMap& p, const Var& zhat) const {
  Arch a(cfg);
  Var t = gelu(a.hs_up[0](p, zhat));
  t = gelu(a.hs_up[1](p, t));
  return a.hs_out(p, t);
}

AuxSynthesis Model::f_s(const VarMap& p, const Var& lf) const {
  Arch a(cfg);
  AuxSynthesis out;
  out.d1 = a.fs_res[0](p, gelu(a.fs_up[0](p, lf)));
  out.d2 = a.fs_res[1](p, gelu(a.fs_up[1](p, out.d1)));
  Var t = a.fs_res[2](p, gelu(a.fs_sub[0](p, out.d2)));
  out.mf = a.fs_sub[1](p, t);
  return out;
}

Var Model::g_s(const VarMap& p, const Var& yhat, const AuxSynthesis* aux) const {
  Arch a(cfg);
  if (cfg.use_auxiliary && !aux)
    throw std::invalid_argument("g_s: auxiliary contexts required");
  Var t = yhat;
  const Var* ds[3] = {nullptr, nullptr, nullptr};
  if (cfg.use_auxiliary) {
    ds[0] = &aux->d1;
    ds[1] = &aux->d2;
  }
  for (int i = 0; i < 3; ++i) {
    t = a.gs_up[i](p, t);
    t = a.gs_igdn[i](p, t);
    for (const auto& r : a.gs_res[i]) t = r(p, t);
    if (ds[i]) t = concat_ch({t, *ds[i]});
  }
  return a.gs_final(p, t);
}

Var Model::fuse(const VarMap& p, const Var& mx, const Var& mf) const {
  Arch a(cfg);
  Var in = cfg.use_auxiliary ? concat_ch({mx, mf}) : mx;
  Var gate = sigmoid(a.fuse_gate(p, in));
  Var cand = tanh_v(a.fuse_cand(p, in));
  return mul(gate, cand);
}

Var Model::reconstruct(const VarMap& p, const Var& ft) const {
  instrumentation::reconstruct_calls.fetch_add(1, std::memory_order_relaxed);
  Arch a(cfg);
  Var t = gelu(a.rec_conv[0](p, ft));
  t = gelu(a.rec_conv[1](p, t));
  return a.rec_conv[2](p, t);
}

Var Model::spatial_ctx(const VarMap& p, int k, const Var& y_masked) const {
  if (!cfg.use_checkerboard)
    throw std::logic_error("spatial_ctx: checkerboard disabled");
  Arch a(cfg);
  return a.sp[k](p, y_masked);
}

Var Model::channel_ctx(const VarMap& p, int k, const Var& y_prev) const {
  if (!cfg.use_channel_ctx)
    throw std::logic_error("channel_ctx: channel context disabled");
  if (k == 0) {
    return make_const(Tensor(
        {cfg.ctx_channels(), y_prev->value.dim(1), y_prev->value.dim(2)}));
  }
  Arch a(cfg);
  return a.ch[k](p, y_prev);
}

Var Model::zero_ctx(int h, int w) const {
  return make_const(Tensor({cfg.ctx_channels(), h, w}));
}

Var Model::ep_stack(const VarMap& p, int k, const Var& in) const {
  Arch a(cfg);
  Var t = gelu(a.ep1[k](p, in));
  t = gelu(a.ep2[k](p, t));
  return a.ep3[k](p, t);
}

Model::Theta Model::entropy_params(const VarMap& p, int k, const Var& phi_sp,
                                   const Var& phi_ch, const Var& lf,
                                   const Var& psi) const {
  std::vector<Var> parts;
  if (cfg.use_checkerboard) {
    if (!phi_sp) throw std::invalid_argument("entropy_params: phi_sp required");
    parts.push_back(phi_sp);
  }
  if (cfg.use_channel_ctx) {
    if (!phi_ch) throw std::invalid_argument("entropy_params: phi_ch required");
    parts.push_back(phi_ch);
  }
  if (cfg.use_auxiliary) {
    if (!lf) throw std::invalid_argument("entropy_params: lf required");
    parts.push_back(lf);
  }
  parts.push_back(psi);
  Var in = parts.size() == 1 ? parts[0] : concat_ch(parts);
  Var out = ep_stack(p, k, in);
  int ck = cfg.group_channels();
  Theta th;
  th.mu = slice_ch(out, 0, ck);
  th.sigma = clamp_min_ste(softplus(slice_ch(out, ck, 2 * ck)), kSigmaMin);
  return th;
}

Var Model::fp_logits(const VarMap& p, const Var& x) const {
  Var v = x;
  for (int l = 0; l < 4; ++l) {
    std::string ls = std::to_string(l);
    v = grouped_linear(softplus(p.at("fp.h" + ls)), v);
    v = add_colvec(v, p.at("fp.b" + ls));
    if (l < 3) v = add(v, mul_colvec(tanh_v(v), tanh_v(p.at("fp.a" + ls))));
  }
  return v;
}

Var Model::fp_bits(const VarMap& p, const Var& z_tilde) const {
  int n = z_tilde->value.dim(0);
  int cols = static_cast<int>(z_tilde->value.numel()) / n;
  Var flat = reshape(z_tilde, {n, cols});
  Var upper = sigmoid(fp_logits(p, add_scalar(flat, 0.5)));
  Var lower = sigmoid(fp_logits(p, add_scalar(flat, -0.5)));
  Var prob = clamp_min_ste(sub(upper, lower), 1e-9);
  return scale(sum(log_v(prob)), -1.4426950408889634);  // nats -> bits
}

std::vector<std::vector<double>> Model::fp_symbol_probs(int tail) const {
  const int n = cfg.hyper_channels;
  const int pts = 2 * tail + 2;  // grid -tail-0.5 .. tail+0.5
  Tensor grid({n, pts});
  for (int c = 0; c < n; ++c)
    for (int j = 0; j < pts; ++j)
      grid.data[static_cast<std::size_t>(c) * pts + j] = -tail - 0.5 + j;
  VarMap p = vars(false);
  Tensor logits = fp_logits(p, make_const(grid))->value;

  std::vector<std::vector<double>> out(n);
  for (int c = 0; c < n; ++c) {
    auto sig = [&](int j) {
      return 1.0 /
             (1.0 + std::exp(-logits.data[static_cast<std::size_t>(c) * pts + j]));
    };
    std::vector<double> probs(2 * tail + 2, 0.0);
    double mass = 0.0;
    for (int s = -tail; s <= tail; ++s) {
      double pr = sig(s + tail + 1) - sig(s + tail);
      if (pr < 0.0) pr = 0.0;
      probs[s + tail] = pr;
      mass += pr;
    }
    probs[2 * tail + 1] = std::max(0.0, 1.0 - mass);  // escape
    out[c] = std::move(probs);
  }
  return out;
}

std::uint64_t Model::model_id() const {
  // FNV-1a over config JSON and tensor payloads
  std::uint64_t h = 14695981039346656037ull;
  auto mix_bytes = [&h](const void* data, std::size_t len) {
    const unsigned char* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  std::string cj = cfg.to_json();
  mix_bytes(cj.data(), cj.size());
  for (const auto& [name, t] : params.tensors) {
    mix_bytes(name.data(), name.size());
    mix_bytes(t.data.data(), t.data.size() * sizeof(double));
  }
  return h;
}

// ---------------------------------------------------------------------------
// parameter container: "VVCK" | version u8 | kind | config json | extra
// json | u32 tensor count | tensors (u16 name len, name, u8 ndim, u32 dims,
// f64 data, all little-endian); strings are u32-length-prefixed

namespace {
constexpr char kCkptMagic[4] = {'V', 'V', 'C', 'K'};
constexpr std::uint8_t kCkptVersion = 1;

void w32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<char*>(b), 4);
}
std::uint32_t r32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("param container: truncated");
  return b[0] | (b[1] << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}
void wstr(std::ostream& os, const std::string& s) {
  w32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string rstr(std::istream& is) {
  std::uint32_t len = r32(is);
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (!is) throw IoError("param container: truncated string");
  return s;
}
}  // namespace

void write_param_container(const std::string& path, const ParamContainer& pc) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("param container: cannot write " + path);
  os.write(kCkptMagic, 4);
  os.put(static_cast<char>(kCkptVersion));
  wstr(os, pc.kind);
  wstr(os, pc.config_json);
  wstr(os, pc.extra_json);
  w32(os, static_cast<std::uint32_t>(pc.params.tensors.size()));
  for (const auto& [name, t] : pc.params.tensors) {
    std::uint16_t nl = static_cast<std::uint16_t>(name.size());
    os.put(static_cast<char>(nl & 0xff));
    os.put(static_cast<char>(nl >> 8));
    os.write(name.data(), nl);
    os.put(static_cast<char>(t.ndim()));
    for (int d : t.shape) w32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!os) throw IoError("param container: write failed " + path);
}

ParamContainer read_param_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("param container: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw FormatError("param container: bad magic");
  int version = is.get();
  if (version != kCkptVersion) throw FormatError("param container: bad version");

  ParamContainer pc;
  pc.kind = rstr(is);
  pc.config_json = rstr(is);
  pc.extra_json = rstr(is);
  std::uint32_t count = r32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    int nl = is.get();
    nl |= is.get() << 8;
    if (!is || nl <= 0) throw IoError("param container: truncated tensor name");
    std::string name(static_cast<std::size_t>(nl), '\0');
    is.read(name.data(), nl);
    int nd = is.get();
    if (nd < 1 || nd > 8) throw FormatError("param container: bad rank");
    std::vector<int> shape(nd);
    for (int d = 0; d < nd; ++d) {
      shape[d] = static_cast<int>(r32(is));
      if (shape[d] < 1) throw FormatError("param container: bad dim");
    }
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!is) throw IoError("param container: truncated tensor data");
    if (!t.all_finite())
      throw FormatError("param container: non-finite values in " + name);
    pc.params.put(name, std::move(t));
  }
  return pc;
}

void save_checkpoint(const std::string& path, const Model& m,
                     const std::string& extra_json) {
  ParamContainer pc;
  pc.kind = "model";
  pc.config_json = m.cfg.to_json();
  pc.extra_json = extra_json;
  pc.params = m.params;
  write_param_container(path, pc);
}

Model load_checkpoint(const std::string& path, std::string* extra_json) {
  ParamContainer pc = read_param_container(path);
  if (pc.kind != "model")
    throw FormatError("checkpoint: not a model container (" + pc.kind + ")");
  if (extra_json) *extra_json = pc.extra_json;

  Model m;
  m.cfg = ModelConfig::from_json(pc.config_json);
  m.params = std::move(pc.params);

  // structural compatibility: stored tensors must coincide with what the
  // config registers
  Model ref = Model::init(m.cfg, 0);
  if (ref.params.tensors.size() != m.params.tensors.size())
    throw FormatError("checkpoint: parameter set mismatch");
  for (const auto& [name, t] : ref.params.tensors) {
    auto it = m.params.tensors.find(name);
    if (it == m.params.tensors.end())
      throw FormatError("checkpoint: missing parameter " + name);
    if (it->second.shape != t.shape)
      throw FormatError("checkpoint: shape mismatch for " + name);
  }
  return m;
}

}  // namespace vvmc
