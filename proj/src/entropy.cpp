#include "vvmc/entropy.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace vvmc {

ChannelSlicePlan ChannelSlicePlan::even(int channels, int k) {
  if (k < 1 || channels < k)
    throw std::invalid_argument("channel plan: need 1 <= k <= channels");
  ChannelSlicePlan p;
  p.total = channels;
  int base = channels / k, rem = channels % k;
  int at = 0;
  for (int i = 0; i < k; ++i) {
    int len = base + (i < rem ? 1 : 0);
    p.ranges.emplace_back(at, at + len);
    at += len;
  }
  return p;
}

int ChannelSlicePlan::group_of(int channel) const {
  for (std::size_t i = 0; i < ranges.size(); ++i)
    if (channel >= ranges[i].first && channel < ranges[i].second)
      return static_cast<int>(i);
  throw std::out_of_range("channel plan: channel out of range");
}

Tensor anchor_mask(int h, int w) {
  Tensor m({1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at3(0, y, x) = ((y + x) % 2 == 0) ? 1.0 : 0.0;
  return m;
}

Tensor expand_mask(const Tensor& mask, int channels, bool anchors) {
  int h = mask.dim(1), w = mask.dim(2);
  Tensor out({channels, h, w});
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at3(c, y, x) = anchors ? mask.at3(0, y, x) : 1.0 - mask.at3(0, y, x);
  return out;
}

// ---------------------------------------------------------------------------

const Tensor& QuantCapture::next(Tensor fresh) {
  if (mode == Mode::record) {
    records.push_back(std::move(fresh));
    return records.back();
  }
  if (cursor >= records.size())
    throw std::logic_error("quant capture: replay exhausted");
  return records[cursor++];
}

Var quantize_noise(const Var& y, Rng& rng, QuantCapture* cap) {
  Tensor u(y->value.shape);
  if (!cap || cap->mode == QuantCapture::Mode::record)
    for (double& v : u.data) v = rng.uniform() - 0.5;
  const Tensor& use = cap ? cap->next(std::move(u)) : u;
  return add_const(y, use);
}

Var quantize_ste(const Var& y, const Tensor& mu, QuantCapture* cap) {
  check_same_shape(y->value, mu, "quantize_ste");
  Tensor offset(y->value.shape);
  if (!cap || cap->mode == QuantCapture::Mode::record) {
    for (std::size_t i = 0; i < offset.numel(); ++i) {
      double yi = y->value.data[i], mi = mu.data[i];
      offset.data[i] = std::round(yi - mi) + mi - yi;
    }
  }
  const Tensor& use = cap ? cap->next(std::move(offset)) : offset;
  return add_const(y, use);
}

QuantizedEval quantize_eval(const Tensor& y, const Tensor& mu) {
  check_same_shape(y, mu, "quantize_eval");
  QuantizedEval q;
  q.symbols.resize(y.numel());
  q.yhat = Tensor(y.shape);
  for (std::size_t i = 0; i < y.numel(); ++i) {
    double r = std::round(y.data[i] - mu.data[i]);  // half away from zero
    if (r > 32767.0) r = 32767.0;
    if (r < -32768.0) r = -32768.0;
    q.symbols[i] = static_cast<int>(r);
    q.yhat.data[i] = r + mu.data[i];
  }
  return q;
}

// ---------------------------------------------------------------------------

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }
constexpr double kProbFloor = 1.0 / 65536.0;
}  // namespace

double gaussian_likelihood_raw(double symbol, double sigma) {
  if (sigma < kSigmaMin)
    throw std::invalid_argument("gaussian_likelihood: sigma below bound");
  return std_normal_cdf((symbol + 0.5) / sigma) -
         std_normal_cdf((symbol - 0.5) / sigma);
}

double gaussian_likelihood(double symbol, double sigma) {
  double p = gaussian_likelihood_raw(symbol, sigma);
  return p < kProbFloor ? kProbFloor : p;
}

Var gaussian_bits(const Var& t_centered, const Var& sigma) {
  Var inv = reciprocal(sigma);
  Var upper = normal_cdf(mul(add_scalar(t_centered, 0.5), inv));
  Var lower = normal_cdf(mul(add_scalar(t_centered, -0.5), inv));
  Var p = clamp_min_ste(sub(upper, lower), 1e-9);
  return scale(log_v(p), -1.4426950408889634);
}

std::vector<double> gaussian_symbol_probs(double sigma, int tail) {
  std::vector<double> p(2 * tail + 2, 0.0);
  for (int s = -tail; s <= tail; ++s)
    p[s + tail] = std_normal_cdf((s + 0.5) / sigma) -
                  std_normal_cdf((s - 0.5) / sigma);
  // escape carries the tail mass beyond +-tail
  p[2 * tail + 1] = 2.0 * std_normal_cdf((-tail - 0.5) / sigma);
  return p;
}

CdfTable build_cdf(double sigma) {
  return CdfTable::from_probabilities(gaussian_symbol_probs(sigma, kDefaultTail),
                                      kDefaultTail);
}

const CdfTable* CdfCache::get_gaussian(double sigma) {
  std::uint64_t key = std::bit_cast<std::uint64_t>(sigma);
  auto it = map_.find(key);
  if (it != map_.end()) return it->second.get();
  auto table = std::make_unique<CdfTable>(build_cdf(sigma));
  const CdfTable* out = table.get();
  map_.emplace(key, std::move(table));
  return out;
}

double estimate_rate(const std::vector<double>& likelihoods) {
  double bits = 0.0;
  for (double p : likelihoods) {
    if (!(p > 0.0) || p > 1.0)
      throw std::invalid_argument("estimate_rate: probability out of (0,1]");
    bits -= std::log2(p);
  }
  return bits;
}

}  // namespace vvmc
