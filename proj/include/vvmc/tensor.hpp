#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace vvmc {

// Dense row-major tensor of doubles. Feature maps are (C,H,W), conv weights
// (Cout,Cin,Kh,Kw), everything else whatever shape fits.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(count(shape), 0.0);
  }
  Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
    data.assign(count(shape), fill);
  }
  Tensor(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    assert(data.size() == count(shape));
  }

  static std::size_t count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
  }
  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v) { return Tensor(std::move(s), v); }

  std::size_t numel() const { return data.size(); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool empty() const { return data.empty(); }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  // (C,H,W) accessors
  double& at3(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  double at3(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }

  bool all_finite() const;
  double min() const;
  double max() const;
};

std::string shape_str(const std::vector<int>& s);

// Throws std::invalid_argument with a message naming `where` when shapes differ.
void check_same_shape(const Tensor& a, const Tensor& b, const char* where);

}  // namespace vvmc
