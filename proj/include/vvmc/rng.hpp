#pragma once

#include <cmath>
#include <cstdint>

namespace vvmc {

// SplitMix64 generator with Box-Muller normals. Deliberately not
// std::mt19937 + std::normal_distribution: those are not guaranteed to
// produce identical streams across standard library implementations, and
// seeded reproducibility is part of the training contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0x5eed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0,n)
  int uniform_int(int n) {
    return n <= 1 ? 0 : static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  double normal() {
    if (have_cache_) {
      have_cache_ = false;
      return cache_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cache_ = r * std::sin(a);
    have_cache_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // State round-trips through checkpoints.
  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) {
    state_ = s;
    have_cache_ = false;
  }

 private:
  std::uint64_t state_;
  double cache_ = 0.0;
  bool have_cache_ = false;
};

}  // namespace vvmc
