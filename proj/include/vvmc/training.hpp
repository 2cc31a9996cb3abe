#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vvmc/codec.hpp"
#include "vvmc/model.hpp"

namespace vvmc {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// L = rate_bits / num_pixels + lambda * MSE(x, x_hat), distortion on [0,1]
Var rd_loss(const Var& rate_bits, const Var& x, const Var& x_hat, double lambda,
            double num_pixels);

class Adam {
 public:
  explicit Adam(double lr = 1e-4) : lr_(lr) {}
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  // applies leaf gradients recorded in `vars` to `params`
  void step(ParamStore& params, const VarMap& vars);
  std::map<std::string, Tensor>& first_moments() { return m_; }
  std::map<std::string, Tensor>& second_moments() { return v_; }
  const std::map<std::string, Tensor>& first_moments() const { return m_; }
  const std::map<std::string, Tensor>& second_moments() const { return v_; }
  std::int64_t steps_taken() const { return t_; }
  void set_steps_taken(std::int64_t t) { t_ = t; }

 private:
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

// One slice of the training-time recurrence: noise-relaxed rate, straight-
// through synthesis path, buffer handed to the next slice.
struct SliceForward {
  Var rate_bits;  // scalar, y + z terms
  Var distortion; // scalar MSE
  Var loss;       // rd_loss
  Var x_hat;
  Var f_next;
};
SliceForward forward_train_slice(const Model& m, const VarMap& p, const Var& x,
                                 const Var& f_prev, double lambda, Rng& rng,
                                 QuantCapture* cap = nullptr);

struct StepMetrics {
  double loss = 0;      // mean per-slice RD loss
  double bpp_est = 0;   // noise-relaxed estimate, mean over slices
  double mse = 0;
  double grad_norm = 0;
};

// Forward over the whole window with F_0 = zeros, one optimizer update.
// Gradients flow through the buffer inside the window and are truncated at
// its start.
StepMetrics train_step(Model& m, Adam& opt, const std::vector<Tensor>& window,
                       double lambda, Rng& rng);

struct TrainConfig {
  double lambda = 8192;
  double lr = 1e-4;
  int epochs = 200;
  int decay_every = 20;      // epochs between decays
  double decay_factor = 0.2;
  int gop_stride = 16;
  int batch = 1;             // windows per optimizer step
  int crop = 64;             // spatial crop, multiple of 16
  int bptt = 0;              // max window length; 0 = full group
  std::uint64_t seed = 1;
  int max_steps = -1;        // cap on optimizer steps; -1 = epochs only
  int eval_every_steps = 0;  // 0 = once per epoch
  std::string preset = "desk";
  std::map<std::string, double> model_overrides;  // numeric ModelConfig fields
  bool disable_checkerboard = false;
  bool disable_channel_ctx = false;
  bool disable_auxiliary = false;
  std::vector<std::string> train_volumes;
  std::string eval_volume;  // empty: evaluate on the first training volume
  std::string out_dir = ".";

  ModelConfig model_config() const;
  static TrainConfig from_json_file(const std::string& path);
  void validate() const;
};

struct TrainResult {
  std::string best_checkpoint;
  std::string last_checkpoint;
  double best_eval_rd = 0;
  double final_loss = 0;
  int steps = 0;
};

TrainResult train(const TrainConfig& cfg);
// resumes from the given weights with fresh optimizer state
TrainResult finetune(const std::string& checkpoint_path, const TrainConfig& cfg);

// in-memory variant used by tests and the acceptance suite
TrainResult train_volumes_in_memory(const TrainConfig& cfg,
                                    const std::vector<Volume>& train,
                                    const Volume* eval_volume, Model& model);

struct EvalResult {
  double bpp = 0;
  double psnr = 0;
  double mse_norm = 0;  // on [0,1] scale
  double rd = 0;        // bpp + lambda * mse_norm
};
EvalResult evaluate_rd(const Model& m, const Volume& v, int gop_stride,
                       double lambda);

// Full training state: model weights, optimizer moments, counters and the
// RNG state; loading resumes the exact loss trajectory.
void save_train_state(const std::string& path, const Model& m, const Adam& opt,
                      std::uint64_t rng_state, int epoch, int step);
struct LoadedTrainState {
  Model model;
  Adam opt;
  std::uint64_t rng_state = 0;
  int epoch = 0;
  int step = 0;
};
LoadedTrainState load_train_state(const std::string& path);

}  // namespace vvmc
