#pragma once

#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vvmc/autodiff.hpp"
#include "vvmc/range_coder.hpp"
#include "vvmc/rng.hpp"
#include "vvmc/tensor.hpp"

namespace vvmc {

constexpr double kSigmaMin = 1e-4;

// Contiguous channel ranges decoded in order; later groups condition on
// earlier ones.
struct ChannelSlicePlan {
  int total = 0;
  std::vector<std::pair<int, int>> ranges;  // [from, to)

  static ChannelSlicePlan even(int channels, int k);
  int group_of(int channel) const;
};

// (1,h,w); 1.0 where (i+j) % 2 == 0 (anchors)
Tensor anchor_mask(int h, int w);
// broadcast to (c,h,w); anchors=false selects the complementary positions
Tensor expand_mask(const Tensor& mask, int channels, bool anchors = true);

// ---------------------------------------------------------------------------
// Quantization. The capture buffer makes a forward pass replayable: noise
// draws and rounding offsets recorded once are reused verbatim, which turns
// the straight-through surrogate into a smooth function of the parameters —
// exactly what the gradient check needs to compare against.
struct QuantCapture {
  enum class Mode { record, replay };
  Mode mode = Mode::record;
  std::vector<Tensor> records;
  std::size_t cursor = 0;

  const Tensor& next(Tensor fresh);
  void rewind() { cursor = 0; }
};

// y + u, u ~ U(-0.5, 0.5) iid; identity gradient
Var quantize_noise(const Var& y, Rng& rng, QuantCapture* cap = nullptr);
// round(y - mu) + mu; gradient flows to y only (straight-through)
Var quantize_ste(const Var& y, const Tensor& mu, QuantCapture* cap = nullptr);

// Eval-path quantization: integer symbols s = round(y - mu) (half away from
// zero, clamped to the raw-escape range) and reconstruction s + mu.
struct QuantizedEval {
  std::vector<int> symbols;
  Tensor yhat;
};
QuantizedEval quantize_eval(const Tensor& y, const Tensor& mu);

// ---------------------------------------------------------------------------
// Probabilities and rate

// discretized Gaussian with the mean removed by symbol centering; floored at
// 2^-16 to match the coding tables
double gaussian_likelihood(double symbol, double sigma);
// same, without the coding floor (the telescoping CDF identity holds here)
double gaussian_likelihood_raw(double symbol, double sigma);

// per-element bits of a noisy centered latent: -log2 p with a 1e-9 training
// floor (straight-through at the bound)
Var gaussian_bits(const Var& t_centered, const Var& sigma);

std::vector<double> gaussian_symbol_probs(double sigma, int tail = kDefaultTail);
CdfTable build_cdf(double sigma);

// Memoizes tables per sigma bit pattern; encoder and decoder derive sigma
// through identical arithmetic, so the keys match exactly.
class CdfCache {
 public:
  const CdfTable* get_gaussian(double sigma);
  std::size_t size() const { return map_.size(); }

 private:
  std::unordered_map<std::uint64_t, std::unique_ptr<CdfTable>> map_;
};

// sum of -log2 p
double estimate_rate(const std::vector<double>& likelihoods);

}  // namespace vvmc
