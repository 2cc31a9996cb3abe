#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "vvmc/entropy.hpp"
#include "vvmc/layers.hpp"

namespace vvmc {

struct ModelConfig {
  int latent_channels = 192;     // M
  int hyper_channels = 192;      // N
  int buffer_channels = 16;      // recurrent buffer / M_x / M_F width
  int aux_enc_channels = 32;     // E_1..E_3 width
  int aux_dec_channels = 32;     // D_1..D_2 width
  int aux_latent_channels = 64;  // L_F width
  int recon_channels = 32;
  int groups = 4;                // channel-slice count K
  int res_blocks = 1;            // residual blocks per coder stage
  bool use_checkerboard = true;
  bool use_channel_ctx = true;
  bool use_auxiliary = true;

  static ModelConfig paper();
  static ModelConfig desk();
  static ModelConfig tiny();

  bool operator==(const ModelConfig&) const = default;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& s);
  void validate() const;

  int group_channels() const { return latent_channels / groups; }
  int ctx_channels() const { return 2 * group_channels(); }
  int ep_in_channels(int k) const;
};

// Layer recipe shared by parameter registration and the forwards.
struct Arch {
  explicit Arch(const ModelConfig& c);
  ModelConfig cfg;

  Conv2dLayer ga_conv[4];
  GdnLayer ga_gdn[3];
  std::vector<ResBlock> ga_res[3];

  ConvT2dLayer gs_up[3];
  GdnLayer gs_igdn[3];
  std::vector<ResBlock> gs_res[3];
  SubpixelUp gs_final;

  Conv2dLayer ha_conv[3];
  ConvT2dLayer hs_up[2];
  Conv2dLayer hs_out;

  Conv2dLayer fa_step[4];
  ResBlock fa_res[4];

  ConvT2dLayer fs_up[2];
  SubpixelUp fs_sub[2];
  ResBlock fs_res[3];

  Conv2dLayer fuse_gate, fuse_cand;
  Conv2dLayer rec_conv[3];

  std::vector<Conv2dLayer> sp;          // per group, if checkerboard
  std::vector<Conv2dLayer> ch;          // per group (index 0 unused)
  std::vector<Conv2dLayer> ep1, ep2, ep3;

  void init_all(ParamStore& p, Rng& rng) const;
};

struct AuxAnalysis {
  Var e1, e2, e3, lf;
};
struct AuxSynthesis {
  Var d1, d2, mf;
};

namespace instrumentation {
// counts reconstruction-head invocations; the feature-only decode path must
// leave it untouched
extern std::atomic<std::uint64_t> reconstruct_calls;
}  // namespace instrumentation

class Model {
 public:
  ModelConfig cfg;
  ParamStore params;

  Model() = default;
  static Model init(const ModelConfig& cfg, std::uint64_t seed);

  VarMap vars(bool requires_grad = false) const {
    return VarMap::from(params, requires_grad);
  }

  // ---- transforms ----
  AuxAnalysis f_a(const VarMap& p, const Var& f_prev) const;
  Var g_a(const VarMap& p, const Var& x, const AuxAnalysis* aux) const;
  Var h_a(const VarMap& p, const Var& y) const;
  Var h_s(const VarMap& p, const Var& zhat) const;
  AuxSynthesis f_s(const VarMap& p, const Var& lf) const;
  Var g_s(const VarMap& p, const Var& yhat, const AuxSynthesis* aux) const;
  Var fuse(const VarMap& p, const Var& mx, const Var& mf) const;  // mf null when auxiliary off
  Var reconstruct(const VarMap& p, const Var& ft) const;

  // ---- entropy networks ----
  struct Theta {
    Var mu, sigma;
  };
  // k is 0-based. y_masked carries zeros at not-yet-decoded positions.
  Var spatial_ctx(const VarMap& p, int k, const Var& y_masked) const;
  Var channel_ctx(const VarMap& p, int k, const Var& y_prev) const;
  Var zero_ctx(int h, int w) const;  // all-zero context feature
  Theta entropy_params(const VarMap& p, int k, const Var& phi_sp,
                       const Var& phi_ch, const Var& lf, const Var& psi) const;

  // factorized hyper prior
  Var fp_logits(const VarMap& p, const Var& x) const;  // x (N, n)
  Var fp_bits(const VarMap& p, const Var& z_tilde) const;  // scalar total bits
  // per-integer-symbol probabilities incl. trailing escape mass, one row per
  // hyper channel
  std::vector<std::vector<double>> fp_symbol_probs(int tail) const;

  Tensor initial_buffer(int h, int w) const {
    return Tensor({cfg.buffer_channels, h, w});
  }

  std::uint64_t model_id() const;

 private:
  Var ep_stack(const VarMap& p, int k, const Var& in) const;
};

void save_checkpoint(const std::string& path, const Model& m,
                     const std::string& extra_json = "{}");
Model load_checkpoint(const std::string& path, std::string* extra_json = nullptr);

}  // namespace vvmc
