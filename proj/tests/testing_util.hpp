#pragma once

#include <functional>
#include <vector>

#include "vvmc/autodiff.hpp"
#include "vvmc/rng.hpp"
#include "vvmc/tensor.hpp"

namespace vvmc::testing {

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

// Central-difference check of d(loss)/d(input coords) against the taped
// gradient. Returns the max relative error over checked coordinates.
// `f` must rebuild the graph from the given leaves every call.
inline double gradcheck(
    const std::function<Var(std::vector<Var>&)>& f, std::vector<Tensor> inputs,
    double h = 1e-5, int max_coords_per_input = -1, Rng* pick_rng = nullptr) {
  auto eval = [&](const std::vector<Tensor>& vals) {
    std::vector<Var> leaves;
    for (const auto& t : vals) leaves.push_back(make_leaf(t, true));
    std::vector<Var> copy = leaves;
    return f(copy)->value.data[0];
  };

  // analytic
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(make_leaf(t, true));
  std::vector<Var> copy = leaves;
  Var loss = f(copy);
  backward(loss);

  double max_rel = 0.0;
  Rng fallback(1234);
  Rng& rng = pick_rng ? *pick_rng : fallback;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::size_t n = inputs[i].numel();
    std::vector<std::size_t> coords;
    if (max_coords_per_input < 0 || static_cast<std::size_t>(max_coords_per_input) >= n) {
      for (std::size_t j = 0; j < n; ++j) coords.push_back(j);
    } else {
      for (int k = 0; k < max_coords_per_input; ++k)
        coords.push_back(static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n))));
    }
    for (std::size_t j : coords) {
      double orig = inputs[i].data[j];
      inputs[i].data[j] = orig + h;
      double lp = eval(inputs);
      inputs[i].data[j] = orig - h;
      double lm = eval(inputs);
      inputs[i].data[j] = orig;
      double fd = (lp - lm) / (2.0 * h);
      double an = leaves[i]->grad.empty() ? 0.0 : leaves[i]->grad.data[j];
      double rel = std::abs(fd - an) / std::max(1e-6, std::abs(fd) + std::abs(an));
      if (rel > max_rel) max_rel = rel;
    }
  }
  return max_rel;
}

}  // namespace vvmc::testing
