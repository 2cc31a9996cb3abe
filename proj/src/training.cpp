#include "vvmc/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "vvmc/metrics.hpp"

namespace vvmc {

using nlohmann::json;

Var rd_loss(const Var& rate_bits, const Var& x, const Var& x_hat, double lambda,
            double num_pixels) {
  if (!x->value.all_finite() || !x_hat->value.all_finite())
    throw TrainingError("rd_loss: non-finite inputs");
  Var bpp = scale(rate_bits, 1.0 / num_pixels);
  Var dist = scale(mse(x, x_hat), lambda);
  return add(bpp, dist);
}

void Adam::step(ParamStore& params, const VarMap& vars) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, t] : params.tensors) {
    auto it = vars.vars.find(name);
    if (it == vars.vars.end()) continue;
    const Node& leaf = *it->second;
    if (leaf.grad.shape != leaf.value.shape) continue;  // untouched this step
    Tensor& m = m_.try_emplace(name, Tensor(t.shape)).first->second;
    Tensor& v = v_.try_emplace(name, Tensor(t.shape)).first->second;
    for (std::size_t i = 0; i < t.numel(); ++i) {
      double g = leaf.grad.data[i];
      m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g;
      v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g * g;
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      t.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------

SliceForward forward_train_slice(const Model& m, const VarMap& p, const Var& x,
                                 const Var& f_prev, double lambda, Rng& rng,
                                 QuantCapture* cap) {
  const ModelConfig& cfg = m.cfg;
  const int h = x->value.dim(1), w = x->value.dim(2);

  AuxAnalysis aux;
  Var lf;
  if (cfg.use_auxiliary) {
    aux = m.f_a(p, f_prev);
    lf = aux.lf;
  }
  Var y = m.g_a(p, x, cfg.use_auxiliary ? &aux : nullptr);
  Var z = m.h_a(p, y);

  // hyper rate via noise relaxation; decoder-visible path sees rounded z
  Var z_tilde = quantize_noise(z, rng, cap);
  Var z_bits = m.fp_bits(p, z_tilde);
  Var z_hat = quantize_ste(z, Tensor(z->value.shape), cap);
  const int lh = y->value.dim(1), lw = y->value.dim(2);
  Var psi = crop_spatial(m.h_s(p, z_hat), lh, lw);

  auto plan = ChannelSlicePlan::even(cfg.latent_channels, cfg.groups);
  Tensor amask = anchor_mask(lh, lw);

  Var y_bits_total;
  std::vector<Var> yhat_groups;
  for (int k = 0; k < cfg.groups; ++k) {
    auto [c0, c1] = plan.ranges[k];
    int ck = c1 - c0;
    Var y_k = slice_ch(y, c0, c1);
    Var y_tilde_k = quantize_noise(y_k, rng, cap);

    Var phi_ch;
    if (cfg.use_channel_ctx) {
      if (k == 0)
        phi_ch = m.zero_ctx(lh, lw);
      else
        phi_ch = m.channel_ctx(
            p, k,
            yhat_groups.size() == 1 ? yhat_groups[0] : concat_ch(yhat_groups));
    }

    Var bits_k, yhat_k;
    if (cfg.use_checkerboard) {
      Tensor mask_a = expand_mask(amask, ck, true);
      Tensor mask_n = expand_mask(amask, ck, false);

      Model::Theta th_a =
          m.entropy_params(p, k, m.zero_ctx(lh, lw), phi_ch, lf, psi);
      Var bits_a = mul_const(gaussian_bits(sub(y_tilde_k, th_a.mu), th_a.sigma),
                             mask_a);
      Var yhat_anc = mul_const(quantize_ste(y_k, th_a.mu->value, cap), mask_a);

      Var phi_sp = m.spatial_ctx(p, k, yhat_anc);
      Model::Theta th_n = m.entropy_params(p, k, phi_sp, phi_ch, lf, psi);
      Var bits_n = mul_const(gaussian_bits(sub(y_tilde_k, th_n.mu), th_n.sigma),
                             mask_n);
      Var yhat_non = mul_const(quantize_ste(y_k, th_n.mu->value, cap), mask_n);

      bits_k = add(sum(bits_a), sum(bits_n));
      yhat_k = add(yhat_anc, yhat_non);
    } else {
      Model::Theta th = m.entropy_params(p, k, Var{}, phi_ch, lf, psi);
      bits_k = sum(gaussian_bits(sub(y_tilde_k, th.mu), th.sigma));
      yhat_k = quantize_ste(y_k, th.mu->value, cap);
    }
    y_bits_total = y_bits_total ? add(y_bits_total, bits_k) : bits_k;
    yhat_groups.push_back(yhat_k);
  }
  Var yhat = yhat_groups.size() == 1 ? yhat_groups[0] : concat_ch(yhat_groups);

  AuxSynthesis syn;
  Var mx;
  if (cfg.use_auxiliary) {
    syn = m.f_s(p, lf);
    mx = m.g_s(p, yhat, &syn);
  } else {
    mx = m.g_s(p, yhat, nullptr);
  }
  Var ft = m.fuse(p, mx, syn.mf);
  Var x_hat = m.reconstruct(p, ft);

  SliceForward out;
  out.rate_bits = add(y_bits_total, z_bits);
  out.distortion = mse(x, x_hat);
  out.loss = rd_loss(out.rate_bits, x, x_hat, lambda,
                     static_cast<double>(h) * w);
  out.x_hat = x_hat;
  out.f_next = ft;
  return out;
}

StepMetrics train_step(Model& m, Adam& opt, const std::vector<Tensor>& window,
                       double lambda, Rng& rng) {
  if (window.empty()) throw TrainingError("train_step: empty window");
  VarMap p = VarMap::from(m.params, true);
  const int h = window[0].dim(1), w = window[0].dim(2);

  // truncation boundary: the initial buffer is a constant
  Var f = make_const(m.initial_buffer(h, w));
  Var total;
  double bpp_est = 0, mse_acc = 0;
  for (const Tensor& x : window) {
    SliceForward sf =
        forward_train_slice(m, p, make_const(x), f, lambda, rng, nullptr);
    total = total ? add(total, sf.loss) : sf.loss;
    bpp_est += sf.rate_bits->value.data[0] / (static_cast<double>(h) * w);
    mse_acc += sf.distortion->value.data[0];
    f = sf.f_next;
  }

  StepMetrics met;
  met.loss = total->value.data[0] / static_cast<double>(window.size());
  met.bpp_est = bpp_est / static_cast<double>(window.size());
  met.mse = mse_acc / static_cast<double>(window.size());
  if (!std::isfinite(met.loss)) {
    std::ostringstream os;
    os << "train_step: non-finite loss (bpp_est=" << met.bpp_est
       << " mse=" << met.mse << ")";
    throw TrainingError(os.str());
  }

  backward(total);
  double gn = 0;
  for (const auto& [name, var] : p.vars)
    if (var->grad.shape == var->value.shape)
      for (double g : var->grad.data) gn += g * g;
  met.grad_norm = std::sqrt(gn);
  if (!std::isfinite(met.grad_norm)) {
    std::ostringstream os;
    os << "train_step: non-finite gradients (loss=" << met.loss
       << " grad_norm=" << met.grad_norm << ")";
    throw TrainingError(os.str());
  }
  opt.step(m.params, p);
  return met;
}

// ---------------------------------------------------------------------------

ModelConfig TrainConfig::model_config() const {
  ModelConfig c;
  if (preset == "paper")
    c = ModelConfig::paper();
  else if (preset == "desk")
    c = ModelConfig::desk();
  else if (preset == "tiny")
    c = ModelConfig::tiny();
  else
    throw std::invalid_argument("train config: unknown preset " + preset);
  for (const auto& [key, val] : model_overrides) {
    int v = static_cast<int>(val);
    if (key == "latent_channels") c.latent_channels = v;
    else if (key == "hyper_channels") c.hyper_channels = v;
    else if (key == "buffer_channels") c.buffer_channels = v;
    else if (key == "aux_enc_channels") c.aux_enc_channels = v;
    else if (key == "aux_dec_channels") c.aux_dec_channels = v;
    else if (key == "aux_latent_channels") c.aux_latent_channels = v;
    else if (key == "recon_channels") c.recon_channels = v;
    else if (key == "groups") c.groups = v;
    else if (key == "res_blocks") c.res_blocks = v;
    else
      throw std::invalid_argument("train config: unknown model override " + key);
  }
  if (disable_checkerboard) c.use_checkerboard = false;
  if (disable_channel_ctx) c.use_channel_ctx = false;
  if (disable_auxiliary) c.use_auxiliary = false;
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  if (lambda <= 0) throw std::invalid_argument("train config: lambda > 0");
  if (crop % 16) throw std::invalid_argument("train config: crop % 16 == 0");
  if (gop_stride < 1) throw std::invalid_argument("train config: gop_stride >= 1");
  if (batch < 1) throw std::invalid_argument("train config: batch >= 1");
  model_config();
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("train config: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("train config: bad JSON: " + std::string(e.what()));
  }
  TrainConfig c;
  auto num = [&](const char* key, double def) {
    return j.contains(key) ? j.at(key).get<double>() : def;
  };
  c.lambda = num("lambda", c.lambda);
  c.lr = num("lr", c.lr);
  c.epochs = static_cast<int>(num("epochs", c.epochs));
  c.decay_every = static_cast<int>(num("decay_every", c.decay_every));
  c.decay_factor = num("decay_factor", c.decay_factor);
  c.gop_stride = static_cast<int>(num("gop_stride", c.gop_stride));
  c.batch = static_cast<int>(num("batch", c.batch));
  c.crop = static_cast<int>(num("crop", c.crop));
  c.bptt = static_cast<int>(num("bptt", c.bptt));
  c.seed = static_cast<std::uint64_t>(num("seed", static_cast<double>(c.seed)));
  c.max_steps = static_cast<int>(num("max_steps", c.max_steps));
  c.eval_every_steps = static_cast<int>(num("eval_every_steps", c.eval_every_steps));
  if (j.contains("preset")) c.preset = j.at("preset").get<std::string>();
  if (j.contains("disable_checkerboard"))
    c.disable_checkerboard = j.at("disable_checkerboard").get<bool>();
  if (j.contains("disable_channel_ctx"))
    c.disable_channel_ctx = j.at("disable_channel_ctx").get<bool>();
  if (j.contains("disable_auxiliary"))
    c.disable_auxiliary = j.at("disable_auxiliary").get<bool>();
  for (const char* key :
       {"latent_channels", "hyper_channels", "buffer_channels",
        "aux_enc_channels", "aux_dec_channels", "aux_latent_channels",
        "recon_channels", "groups", "res_blocks"})
    if (j.contains(key)) c.model_overrides[key] = j.at(key).get<double>();
  if (j.contains("train_volumes")) {
    if (j.at("train_volumes").is_array())
      for (const auto& v : j.at("train_volumes"))
        c.train_volumes.push_back(v.get<std::string>());
    else
      c.train_volumes.push_back(j.at("train_volumes").get<std::string>());
  }
  if (j.contains("eval_volume")) c.eval_volume = j.at("eval_volume").get<std::string>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  c.validate();
  return c;
}

EvalResult evaluate_rd(const Model& m, const Volume& v, int gop_stride,
                       double lambda) {
  EncodeStats stats;
  BitstreamContainer c = encode_volume(v, m, gop_stride, &stats);
  Volume rec = decode_volume(c, m);
  EvalResult r;
  r.bpp = stats.total_bits() /
          (static_cast<double>(v.width) * v.height * v.depth);
  double mi = mse_int(v, rec);
  double maxv = static_cast<double>(v.max_value());
  r.mse_norm = mi / (maxv * maxv);
  r.psnr = psnr_from_mse(mi, maxv);
  r.rd = r.bpp + lambda * r.mse_norm;
  return r;
}

namespace {

struct WindowSampler {
  // windows are contiguous runs inside one gop group with aligned crops
  std::vector<std::vector<Tensor>> volumes;  // padded slices per volume
  int gop = 16;
  int crop = 64;
  int bptt = 0;

  std::vector<Tensor> sample(Rng& rng) const {
    const auto& vol = volumes[rng.uniform_int(static_cast<int>(volumes.size()))];
    int n = static_cast<int>(vol.size());
    int group_count = (n + gop - 1) / gop;
    int g = rng.uniform_int(group_count);
    int g0 = g * gop;
    int g1 = std::min(n, g0 + gop);
    int span = g1 - g0;
    int wlen = bptt > 0 ? std::min(bptt, span) : span;
    int start = g0 + rng.uniform_int(span - wlen + 1);

    int h = vol[0].dim(1), w = vol[0].dim(2);
    int ch = std::min(crop, h), cw = std::min(crop, w);
    int oy = h == ch ? 0 : 16 * rng.uniform_int((h - ch) / 16 + 1);
    int ox = w == cw ? 0 : 16 * rng.uniform_int((w - cw) / 16 + 1);

    std::vector<Tensor> window;
    for (int i = start; i < start + wlen; ++i) {
      Tensor t({1, ch, cw});
      for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x)
          t.at3(0, y, x) = vol[i].at3(0, oy + y, ox + x);
      window.push_back(std::move(t));
    }
    return window;
  }
};

std::vector<Tensor> pad_volume(const Volume& v) {
  std::vector<Tensor> out;
  for (const auto& s : normalize(v)) out.push_back(pad_to_multiple(s, 16).first);
  return out;
}

}  // namespace

TrainResult train_volumes_in_memory(const TrainConfig& cfg,
                                    const std::vector<Volume>& train,
                                    const Volume* eval_volume, Model& model) {
  cfg.validate();
  if (train.empty()) throw TrainingError("train: dataset is empty");
  std::filesystem::create_directories(cfg.out_dir);

  WindowSampler sampler;
  sampler.gop = cfg.gop_stride;
  sampler.crop = cfg.crop;
  sampler.bptt = cfg.bptt;
  int groups_total = 0;
  for (const auto& v : train) {
    sampler.volumes.push_back(pad_volume(v));
    groups_total += (v.depth + cfg.gop_stride - 1) / cfg.gop_stride;
  }
  const Volume& ev = eval_volume ? *eval_volume : train[0];

  Adam opt(cfg.lr);
  Rng rng(cfg.seed);
  std::ofstream log(cfg.out_dir + "/metrics.csv");
  log << "step,loss,bpp_est,bpp_real,psnr\n";

  TrainResult res;
  res.best_eval_rd = std::numeric_limits<double>::infinity();
  std::string best_path = cfg.out_dir + "/best.vvck";
  std::string last_path = cfg.out_dir + "/last.vvck";

  // max_steps, when set, is the exact step budget (smoke runs); otherwise
  // the epoch schedule decides
  int steps_per_epoch = std::max(1, groups_total);
  int total_steps = cfg.max_steps >= 0 ? cfg.max_steps
                                       : cfg.epochs * steps_per_epoch;
  StepMetrics met;
  int step = 0;
  while (step < total_steps) {
    int epoch = step / steps_per_epoch;
    opt.set_lr(cfg.lr * std::pow(cfg.decay_factor, epoch / cfg.decay_every));
    for (int b = 0; b < cfg.batch; ++b) {
      auto window = sampler.sample(rng);
      met = train_step(model, opt, window, cfg.lambda, rng);
    }
    ++step;
    bool eval_now = cfg.eval_every_steps > 0
                        ? (step % cfg.eval_every_steps == 0)
                        : (step % steps_per_epoch == 0);
    if (step == total_steps) eval_now = true;
    if (eval_now) {
      EvalResult er = evaluate_rd(model, ev, cfg.gop_stride, cfg.lambda);
      log << step << "," << met.loss << "," << met.bpp_est << "," << er.bpp
          << "," << er.psnr << "\n";
      log.flush();
      if (er.rd < res.best_eval_rd) {
        res.best_eval_rd = er.rd;
        save_checkpoint(best_path, model,
                        "{\"lambda\":" + std::to_string(cfg.lambda) + "}");
      }
    } else {
      log << step << "," << met.loss << "," << met.bpp_est << ",,\n";
    }
  }
  save_checkpoint(last_path, model,
                  "{\"lambda\":" + std::to_string(cfg.lambda) + "}");
  if (!std::filesystem::exists(best_path)) save_checkpoint(best_path, model);
  res.best_checkpoint = best_path;
  res.last_checkpoint = last_path;
  res.final_loss = met.loss;
  res.steps = step;
  return res;
}

TrainResult train(const TrainConfig& cfg) {
  std::vector<Volume> vols;
  for (const auto& p : cfg.train_volumes) vols.push_back(load_vvol(p));
  std::optional<Volume> ev;
  if (!cfg.eval_volume.empty()) ev = load_vvol(cfg.eval_volume);
  Model model = Model::init(cfg.model_config(), cfg.seed);
  return train_volumes_in_memory(cfg, vols, ev ? &*ev : nullptr, model);
}

void save_train_state(const std::string& path, const Model& m, const Adam& opt,
                      std::uint64_t rng_state, int epoch, int step) {
  ParamContainer pc;
  pc.kind = "train_state";
  pc.config_json = m.cfg.to_json();
  json extra;
  extra["epoch"] = epoch;
  extra["step"] = step;
  extra["adam_t"] = opt.steps_taken();
  extra["lr"] = opt.lr();
  extra["rng_state"] = rng_state;
  pc.extra_json = extra.dump();
  pc.params = m.params;
  for (const auto& [name, t] : opt.first_moments())
    pc.params.put("adam.m." + name, t);
  for (const auto& [name, t] : opt.second_moments())
    pc.params.put("adam.v." + name, t);
  write_param_container(path, pc);
}

LoadedTrainState load_train_state(const std::string& path) {
  ParamContainer pc = read_param_container(path);
  if (pc.kind != "train_state")
    throw FormatError("train state: wrong container kind (" + pc.kind + ")");
  json extra = json::parse(pc.extra_json);
  LoadedTrainState st;
  st.model.cfg = ModelConfig::from_json(pc.config_json);
  st.epoch = extra.at("epoch").get<int>();
  st.step = extra.at("step").get<int>();
  st.rng_state = extra.at("rng_state").get<std::uint64_t>();
  st.opt.set_lr(extra.at("lr").get<double>());
  st.opt.set_steps_taken(extra.at("adam_t").get<std::int64_t>());
  for (const auto& [name, t] : pc.params.tensors) {
    if (name.rfind("adam.m.", 0) == 0)
      st.opt.first_moments().emplace(name.substr(7), t);
    else if (name.rfind("adam.v.", 0) == 0)
      st.opt.second_moments().emplace(name.substr(7), t);
    else
      st.model.params.put(name, t);
  }
  return st;
}

TrainResult finetune(const std::string& checkpoint_path, const TrainConfig& cfg) {
  std::vector<Volume> vols;
  for (const auto& p : cfg.train_volumes) vols.push_back(load_vvol(p));
  std::optional<Volume> ev;
  if (!cfg.eval_volume.empty()) ev = load_vvol(cfg.eval_volume);
  Model model = load_checkpoint(checkpoint_path);
  if (model.cfg != cfg.model_config())
    throw CompatibilityError(
        "finetune: checkpoint architecture does not match config");
  return train_volumes_in_memory(cfg, vols, ev ? &*ev : nullptr, model);
}

}  // namespace vvmc
