#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vvmc/tensor.hpp"

namespace vvmc {

// Dynamically built reverse-mode graph. Nodes whose parents carry no
// gradient collapse to constants, so encode/decode run the same functions
// as training without taping anything.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backfn;

  Tensor& ensure_grad() {
    if (grad.shape != value.shape) grad = Tensor::zeros(value.shape);
    return grad;
  }
};

Var make_leaf(Tensor value, bool requires_grad = true);
Var make_const(Tensor value);
Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backfn);

// root must be scalar; seeds d(root)/d(root)=1 and sweeps the graph.
void backward(const Var& root);

// ---- elementwise ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_const(const Var& a, const Tensor& t);  // t is ungraded
Var mul_const(const Var& a, const Tensor& t);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var square(const Var& a);
Var gelu(const Var& a);
Var sigmoid(const Var& a);
Var tanh_v(const Var& a);
Var softplus(const Var& a);
Var log_v(const Var& a);
Var reciprocal(const Var& a);
Var normal_cdf(const Var& a);
// max(a, bound); gradient passes when above the bound or when it would
// push the value back up (lower-bound straight-through).
Var clamp_min_ste(const Var& a, double bound);
Var stop_grad(const Var& a);

// ---- reductions ----
Var sum(const Var& a);
Var mean(const Var& a);
Var mse(const Var& a, const Var& b);

// ---- shape ----
Var concat_ch(const std::vector<Var>& parts);      // (C,H,W) along C
Var slice_ch(const Var& a, int c0, int c1);
Var reshape(const Var& a, std::vector<int> shape);
Var pixel_shuffle(const Var& a, int r);
// keep all channels, take the top-left (h,w) window
Var crop_spatial(const Var& a, int h, int w);

// ---- linear algebra / conv ----
// w (Cout,Cin,Kh,Kw), b (Cout) or empty Var
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
// w (Cin,Cout,Kh,Kw)
Var convt2d(const Var& x, const Var& w, const Var& b, int stride, int pad,
            int opad);
// beta (C) > 0 and gamma (C,C) >= 0 are the effective (already
// reparameterized) coefficients.
Var gdn(const Var& x, const Var& beta, const Var& gamma, bool inverse);
// w (o,i) x (i,n) -> (o,n)
Var linear(const Var& w, const Var& x);
Var add_colvec(const Var& x, const Var& b);  // (o,n) + (o)
Var mul_colvec(const Var& x, const Var& b);  // (o,n) * (o)
// w (g,o,i) x (g*i,n) -> (g*o,n); independent linear map per group
Var grouped_linear(const Var& w, const Var& x);

}  // namespace vvmc
