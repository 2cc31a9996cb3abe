#include "vvmc/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "vvmc/kernels.hpp"

namespace vvmc {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double phi_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }
double phi_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }
}  // namespace

Var make_leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

Var make_const(Tensor value) { return make_leaf(std::move(value), false); }

Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backfn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& p : parents)
    if (p && p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backfn = std::move(backfn);
  }
  return n;
}

void backward(const Var& root) {
  if (root->value.numel() != 1)
    throw std::invalid_argument("backward: root must be scalar");
  if (!root->requires_grad) return;

  // iterative post-order topo sort
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root->ensure_grad().data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backfn && n->grad.shape == n->value.shape) n->backfn(*n);
  }
}

// ---------------------------------------------------------------------------
// elementwise

namespace {
void acc(Tensor& dst, const Tensor& src) {
  double* d = dst.ptr();
  const double* s = src.ptr();
  for (std::size_t i = 0; i < dst.numel(); ++i) d[i] += s[i];
}
}  // namespace

Var add(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "add");
  Tensor out = a->value;
  acc(out, b->value);
  Var pa = a, pb = b;
  return make_node(std::move(out), {a, b}, [pa, pb](Node& n) {
    if (pa->requires_grad) acc(pa->ensure_grad(), n.grad);
    if (pb->requires_grad) acc(pb->ensure_grad(), n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "sub");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= b->value.data[i];
  Var pa = a, pb = b;
  return make_node(std::move(out), {a, b}, [pa, pb](Node& n) {
    if (pa->requires_grad) acc(pa->ensure_grad(), n.grad);
    if (pb->requires_grad) {
      Tensor& g = pb->ensure_grad();
      for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] -= n.grad.data[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "mul");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= b->value.data[i];
  Var pa = a, pb = b;
  return make_node(std::move(out), {a, b}, [pa, pb](Node& n) {
    if (pa->requires_grad) {
      Tensor& g = pa->ensure_grad();
      for (std::size_t i = 0; i < g.numel(); ++i)
        g.data[i] += n.grad.data[i] * pb->value.data[i];
    }
    if (pb->requires_grad) {
      Tensor& g = pb->ensure_grad();
      for (std::size_t i = 0; i < g.numel(); ++i)
        g.data[i] += n.grad.data[i] * pa->value.data[i];
    }
  });
}

Var add_const(const Var& a, const Tensor& t) {
  check_same_shape(a->value, t, "add_const");
  Tensor out = a->value;
  acc(out, t);
  Var pa = a;
  return make_node(std::move(out), {a},
                   [pa](Node& n) { acc(pa->ensure_grad(), n.grad); });
}

Var mul_const(const Var& a, const Tensor& t) {
  check_same_shape(a->value, t, "mul_const");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= t.data[i];
  Var pa = a;
  Tensor tc = t;
  return make_node(std::move(out), {a}, [pa, tc](Node& n) {
    Tensor& g = pa->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i)
      g.data[i] += n.grad.data[i] * tc.data[i];
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a->value;
  for (double& v : out.data) v *= s;
  Var pa = a;
  return make_node(std::move(out), {a}, [pa, s](Node& n) {
    Tensor& g = pa->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += s * n.grad.data[i];
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a->value;
  for (double& v : out.data) v += s;
  Var pa = a;
  return make_node(std::move(out), {a},
                   [pa](Node& n) { acc(pa->ensure_grad(), n.grad); });
}

namespace {
// generic unary op: value f(x), backward df(x, y) * g
template <class F, class DF>
Var unary(const Var& a, F f, DF df) {
  Tensor out(a->value.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = f(a->value.data[i]);
  Var pa = a;
  Tensor saved = out;
  return make_node(std::move(out), {a}, [pa, df, saved](Node& n) {
    Tensor& g = pa->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i)
      g.data[i] += n.grad.data[i] * df(pa->value.data[i], saved.data[i]);
  });
}
}  // namespace

Var square(const Var& a) {
  return unary(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Var gelu(const Var& a) {
  return unary(
      a, [](double x) { return x * phi_cdf(x); },
      [](double x, double) { return phi_cdf(x) + x * phi_pdf(x); });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh_v(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var softplus(const Var& a) {
  return unary(
      a,
      [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var log_v(const Var& a) {
  return unary(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var reciprocal(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / x; },
      [](double, double y) { return -y * y; });
}

Var normal_cdf(const Var& a) {
  return unary(
      a, [](double x) { return phi_cdf(x); },
      [](double x, double) { return phi_pdf(x); });
}

Var clamp_min_ste(const Var& a, double bound) {
  Tensor out = a->value;
  for (double& v : out.data) v = v < bound ? bound : v;
  Var pa = a;
  return make_node(std::move(out), {a}, [pa, bound](Node& n) {
    Tensor& g = pa->ensure_grad();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      double gi = n.grad.data[i];
      if (pa->value.data[i] >= bound || gi < 0.0) g.data[i] += gi;
    }
  });
}

Var stop_grad(const Var& a) { return make_const(a->value); }

// ---------------------------------------------------------------------------
// reductions

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a->value.data) s += v;
  Var pa = a;
  return make_node(Tensor({1}, std::vector<double>{s}), {a}, [pa](Node& n) {
    Tensor& g = pa->ensure_grad();
    double gs = n.grad.data[0];
    for (double& v : g.data) v += gs;
  });
}

Var mean(const Var& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a->value.numel()));
}

Var mse(const Var& a, const Var& b) {
  check_same_shape(a->value, b->value, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a->value.numel(); ++i) {
    double d = a->value.data[i] - b->value.data[i];
    s += d * d;
  }
  double inv_n = 1.0 / static_cast<double>(a->value.numel());
  Var pa = a, pb = b;
  return make_node(Tensor({1}, std::vector<double>{s * inv_n}), {a, b},
                   [pa, pb, inv_n](Node& n) {
                     double gs = 2.0 * inv_n * n.grad.data[0];
                     if (pa->requires_grad) {
                       Tensor& g = pa->ensure_grad();
                       for (std::size_t i = 0; i < g.numel(); ++i)
                         g.data[i] += gs * (pa->value.data[i] - pb->value.data[i]);
                     }
                     if (pb->requires_grad) {
                       Tensor& g = pb->ensure_grad();
                       for (std::size_t i = 0; i < g.numel(); ++i)
                         g.data[i] -= gs * (pa->value.data[i] - pb->value.data[i]);
                     }
                   });
}

// ---------------------------------------------------------------------------
// shape ops

Var concat_ch(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_ch: empty");
  int h = parts[0]->value.dim(1), w = parts[0]->value.dim(2);
  int c = 0;
  for (const auto& p : parts) {
    if (p->value.ndim() != 3 || p->value.dim(1) != h || p->value.dim(2) != w)
      throw std::invalid_argument("concat_ch: spatial mismatch");
    c += p->value.dim(0);
  }
  Tensor out({c, h, w});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data.begin(), p->value.data.end(), out.data.begin() + off);
    off += p->value.numel();
  }
  std::vector<Var> ps = parts;
  return make_node(std::move(out), ps, [ps](Node& n) {
    std::size_t off = 0;
    for (const auto& p : ps) {
      if (p->requires_grad) {
        Tensor& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.numel(); ++i)
          g.data[i] += n.grad.data[off + i];
      }
      off += p->value.numel();
    }
  });
}

Var slice_ch(const Var& a, int c0, int c1) {
  int h = a->value.dim(1), w = a->value.dim(2);
  std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out({c1 - c0, h, w});
  std::copy(a->value.data.begin() + c0 * plane, a->value.data.begin() + c1 * plane,
            out.data.begin());
  Var pa = a;
  return make_node(std::move(out), {a}, [pa, c0, plane](Node& n) {
    Tensor& g = pa->ensure_grad();
    for (std::size_t i = 0; i < n.grad.numel(); ++i)
      g.data[c0 * plane + i] += n.grad.data[i];
  });
}

Var reshape(const Var& a, std::vector<int> shape) {
  if (Tensor::count(shape) != a->value.numel())
    throw std::invalid_argument("reshape: numel mismatch");
  Tensor out(std::move(shape), a->value.data);
  Var pa = a;
  return make_node(std::move(out), {a},
                   [pa](Node& n) { acc(pa->ensure_grad(), n.grad); });
}

Var crop_spatial(const Var& a, int h, int w) {
  int c = a->value.dim(0), ih = a->value.dim(1), iw = a->value.dim(2);
  if (h > ih || w > iw) throw std::invalid_argument("crop_spatial: grows");
  if (h == ih && w == iw) {
    Var pa = a;
    return make_node(a->value, {a},
                     [pa](Node& n) { acc(pa->ensure_grad(), n.grad); });
  }
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at3(ch, y, x) = a->value.at3(ch, y, x);
  Var pa = a;
  return make_node(std::move(out), {a}, [pa, c, h, w](Node& n) {
    Tensor& g = pa->ensure_grad();
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) g.at3(ch, y, x) += n.grad.at3(ch, y, x);
  });
}

Var pixel_shuffle(const Var& a, int r) {
  int c = a->value.dim(0), h = a->value.dim(1), w = a->value.dim(2);
  if (c % (r * r)) throw std::invalid_argument("pixel_shuffle: channels % r^2");
  int co = c / (r * r);
  Tensor out({co, h * r, w * r});
  kernels::pixel_shuffle_fwd(a->value.ptr(), co, r, h, w, out.ptr());
  Var pa = a;
  return make_node(std::move(out), {a}, [pa, co, r, h, w](Node& n) {
    Tensor gx({co * r * r, h, w});
    kernels::pixel_shuffle_bwd(n.grad.ptr(), co, r, h, w, gx.ptr());
    acc(pa->ensure_grad(), gx);
  });
}

// ---------------------------------------------------------------------------
// conv / gdn / linear

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  int ci = x->value.dim(0), h = x->value.dim(1), ww = x->value.dim(2);
  int co = w->value.dim(0), kh = w->value.dim(2), kw = w->value.dim(3);
  if (w->value.dim(1) != ci)
    throw std::invalid_argument("conv2d: weight in-channels " +
                                shape_str(w->value.shape) + " vs input " +
                                shape_str(x->value.shape));
  int ho = kernels::conv_out_dim(h, kh, stride, pad);
  int wo = kernels::conv_out_dim(ww, kw, stride, pad);
  Tensor out({co, ho, wo});
  kernels::conv2d_fwd(x->value.ptr(), ci, h, ww, w->value.ptr(), co, kh, kw,
                      b ? b->value.ptr() : nullptr, stride, pad, out.ptr(), ho,
                      wo);
  Var px = x, pw = w, pb = b;
  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_node(std::move(out), std::move(parents),
                   [px, pw, pb, stride, pad, ci, h, ww, co, kh, kw](Node& n) {
                     int ho = n.value.dim(1), wo = n.value.dim(2);
                     if (px->requires_grad) {
                       Tensor gx({ci, h, ww});
                       kernels::conv2d_bwd_input(n.grad.ptr(), co, ho, wo,
                                                 pw->value.ptr(), ci, kh, kw,
                                                 stride, pad, gx.ptr(), h, ww);
                       acc(px->ensure_grad(), gx);
                     }
                     if (pw->requires_grad || (pb && pb->requires_grad)) {
                       Tensor gw({co, ci, kh, kw});
                       Tensor gb({co});
                       kernels::conv2d_bwd_weight(n.grad.ptr(), co, ho, wo,
                                                  px->value.ptr(), ci, h, ww, kh,
                                                  kw, stride, pad, gw.ptr(),
                                                  gb.ptr());
                       if (pw->requires_grad) acc(pw->ensure_grad(), gw);
                       if (pb && pb->requires_grad) acc(pb->ensure_grad(), gb);
                     }
                   });
}

Var convt2d(const Var& x, const Var& w, const Var& b, int stride, int pad,
            int opad) {
  int ci = x->value.dim(0), h = x->value.dim(1), ww = x->value.dim(2);
  int co = w->value.dim(1), kh = w->value.dim(2), kw = w->value.dim(3);
  if (w->value.dim(0) != ci)
    throw std::invalid_argument("convt2d: weight in-channels mismatch");
  int ho = kernels::convt_out_dim(h, kh, stride, pad, opad);
  int wo = kernels::convt_out_dim(ww, kw, stride, pad, opad);
  Tensor out({co, ho, wo});
  kernels::convt2d_fwd(x->value.ptr(), ci, h, ww, w->value.ptr(), co, kh, kw,
                       b ? b->value.ptr() : nullptr, stride, pad, opad,
                       out.ptr(), ho, wo);
  Var px = x, pw = w, pb = b;
  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_node(std::move(out), std::move(parents),
                   [px, pw, pb, stride, pad, ci, h, ww, co, kh, kw](Node& n) {
                     int ho = n.value.dim(1), wo = n.value.dim(2);
                     if (px->requires_grad) {
                       Tensor gx({ci, h, ww});
                       kernels::convt2d_bwd_input(n.grad.ptr(), co, ho, wo,
                                                  pw->value.ptr(), ci, kh, kw,
                                                  stride, pad, gx.ptr(), h, ww);
                       acc(px->ensure_grad(), gx);
                     }
                     if (pw->requires_grad || (pb && pb->requires_grad)) {
                       Tensor gw({ci, co, kh, kw});
                       Tensor gb({co});
                       kernels::convt2d_bwd_weight(n.grad.ptr(), co, ho, wo,
                                                   px->value.ptr(), ci, h, ww,
                                                   kh, kw, stride, pad, gw.ptr(),
                                                   gb.ptr());
                       if (pw->requires_grad) acc(pw->ensure_grad(), gw);
                       if (pb && pb->requires_grad) acc(pb->ensure_grad(), gb);
                     }
                   });
}

Var gdn(const Var& x, const Var& beta, const Var& gamma, bool inverse) {
  int c = x->value.dim(0);
  int p = static_cast<int>(x->value.numel()) / c;
  if (beta->value.numel() != static_cast<std::size_t>(c) ||
      gamma->value.numel() != static_cast<std::size_t>(c) * c)
    throw std::invalid_argument("gdn: coefficient shape mismatch");
  Tensor out(x->value.shape);
  auto denom = std::make_shared<Tensor>(Tensor({c, p}));
  kernels::gdn_fwd(x->value.ptr(), c, p, beta->value.ptr(), gamma->value.ptr(),
                   inverse, out.ptr(), denom->ptr());
  Var px = x, pbe = beta, pga = gamma;
  return make_node(std::move(out), {x, beta, gamma},
                   [px, pbe, pga, denom, c, p, inverse](Node& n) {
                     Tensor gx(px->value.shape);
                     Tensor gbeta({c});
                     Tensor ggamma({c, c});
                     kernels::gdn_bwd(n.grad.ptr(), px->value.ptr(),
                                      denom->ptr(), c, p, pga->value.ptr(),
                                      inverse, gx.ptr(), gbeta.ptr(),
                                      ggamma.ptr());
                     if (px->requires_grad) acc(px->ensure_grad(), gx);
                     if (pbe->requires_grad) acc(pbe->ensure_grad(), gbeta);
                     if (pga->requires_grad) acc(pga->ensure_grad(), ggamma);
                   });
}

Var linear(const Var& w, const Var& x) {
  int o = w->value.dim(0), i = w->value.dim(1);
  int i2 = x->value.dim(0), nn = x->value.dim(1);
  if (i != i2) throw std::invalid_argument("linear: inner dim mismatch");
  Tensor out({o, nn});
  for (int r = 0; r < o; ++r)
    for (int k = 0; k < i; ++k) {
      double wv = w->value.data[static_cast<std::size_t>(r) * i + k];
      const double* xr = x->value.ptr() + static_cast<std::size_t>(k) * nn;
      double* yr = out.ptr() + static_cast<std::size_t>(r) * nn;
      for (int col = 0; col < nn; ++col) yr[col] += wv * xr[col];
    }
  Var pw = w, px = x;
  return make_node(std::move(out), {w, x}, [pw, px, o, i, nn](Node& n) {
    if (pw->requires_grad) {
      Tensor& gw = pw->ensure_grad();
      for (int r = 0; r < o; ++r)
        for (int k = 0; k < i; ++k) {
          double a = 0.0;
          const double* gr = n.grad.ptr() + static_cast<std::size_t>(r) * nn;
          const double* xr = px->value.ptr() + static_cast<std::size_t>(k) * nn;
          for (int col = 0; col < nn; ++col) a += gr[col] * xr[col];
          gw.data[static_cast<std::size_t>(r) * i + k] += a;
        }
    }
    if (px->requires_grad) {
      Tensor& gx = px->ensure_grad();
      for (int k = 0; k < i; ++k)
        for (int r = 0; r < o; ++r) {
          double wv = pw->value.data[static_cast<std::size_t>(r) * i + k];
          const double* gr = n.grad.ptr() + static_cast<std::size_t>(r) * nn;
          double* gk = gx.ptr() + static_cast<std::size_t>(k) * nn;
          for (int col = 0; col < nn; ++col) gk[col] += wv * gr[col];
        }
    }
  });
}

Var grouped_linear(const Var& w, const Var& x) {
  int g = w->value.dim(0), o = w->value.dim(1), i = w->value.dim(2);
  int nn = x->value.dim(1);
  if (x->value.dim(0) != g * i)
    throw std::invalid_argument("grouped_linear: input rows mismatch");
  Tensor out({g * o, nn});
  for (int gr = 0; gr < g; ++gr)
    for (int r = 0; r < o; ++r) {
      double* yr = out.ptr() + static_cast<std::size_t>(gr * o + r) * nn;
      for (int k = 0; k < i; ++k) {
        double wv = w->value.data[(static_cast<std::size_t>(gr) * o + r) * i + k];
        const double* xr = x->value.ptr() + static_cast<std::size_t>(gr * i + k) * nn;
        for (int col = 0; col < nn; ++col) yr[col] += wv * xr[col];
      }
    }
  Var pw = w, px = x;
  return make_node(std::move(out), {w, x}, [pw, px, g, o, i, nn](Node& n) {
    if (pw->requires_grad) {
      Tensor& gw = pw->ensure_grad();
      for (int gr = 0; gr < g; ++gr)
        for (int r = 0; r < o; ++r) {
          const double* grad_r = n.grad.ptr() + static_cast<std::size_t>(gr * o + r) * nn;
          for (int k = 0; k < i; ++k) {
            const double* xr = px->value.ptr() + static_cast<std::size_t>(gr * i + k) * nn;
            double a = 0.0;
            for (int col = 0; col < nn; ++col) a += grad_r[col] * xr[col];
            gw.data[(static_cast<std::size_t>(gr) * o + r) * i + k] += a;
          }
        }
    }
    if (px->requires_grad) {
      Tensor& gx = px->ensure_grad();
      for (int gr = 0; gr < g; ++gr)
        for (int k = 0; k < i; ++k) {
          double* gk = gx.ptr() + static_cast<std::size_t>(gr * i + k) * nn;
          for (int r = 0; r < o; ++r) {
            double wv = pw->value.data[(static_cast<std::size_t>(gr) * o + r) * i + k];
            const double* grad_r =
                n.grad.ptr() + static_cast<std::size_t>(gr * o + r) * nn;
            for (int col = 0; col < nn; ++col) gk[col] += wv * grad_r[col];
          }
        }
    }
  });
}

Var add_colvec(const Var& x, const Var& b) {
  int o = x->value.dim(0), nn = x->value.dim(1);
  if (b->value.numel() != static_cast<std::size_t>(o))
    throw std::invalid_argument("add_colvec: size mismatch");
  Tensor out = x->value;
  for (int r = 0; r < o; ++r) {
    double bv = b->value.data[r];
    double* yr = out.ptr() + static_cast<std::size_t>(r) * nn;
    for (int col = 0; col < nn; ++col) yr[col] += bv;
  }
  Var px = x, pb = b;
  return make_node(std::move(out), {x, b}, [px, pb, o, nn](Node& n) {
    if (px->requires_grad) acc(px->ensure_grad(), n.grad);
    if (pb->requires_grad) {
      Tensor& g = pb->ensure_grad();
      for (int r = 0; r < o; ++r) {
        double a = 0.0;
        const double* gr = n.grad.ptr() + static_cast<std::size_t>(r) * nn;
        for (int col = 0; col < nn; ++col) a += gr[col];
        g.data[r] += a;
      }
    }
  });
}

Var mul_colvec(const Var& x, const Var& b) {
  int o = x->value.dim(0), nn = x->value.dim(1);
  if (b->value.numel() != static_cast<std::size_t>(o))
    throw std::invalid_argument("mul_colvec: size mismatch");
  Tensor out = x->value;
  for (int r = 0; r < o; ++r) {
    double bv = b->value.data[r];
    double* yr = out.ptr() + static_cast<std::size_t>(r) * nn;
    for (int col = 0; col < nn; ++col) yr[col] *= bv;
  }
  Var px = x, pb = b;
  return make_node(std::move(out), {x, b}, [px, pb, o, nn](Node& n) {
    if (px->requires_grad) {
      Tensor& g = px->ensure_grad();
      for (int r = 0; r < o; ++r) {
        double bv = pb->value.data[r];
        const double* gr = n.grad.ptr() + static_cast<std::size_t>(r) * nn;
        double* gx = g.ptr() + static_cast<std::size_t>(r) * nn;
        for (int col = 0; col < nn; ++col) gx[col] += bv * gr[col];
      }
    }
    if (pb->requires_grad) {
      Tensor& g = pb->ensure_grad();
      for (int r = 0; r < o; ++r) {
        double a = 0.0;
        const double* gr = n.grad.ptr() + static_cast<std::size_t>(r) * nn;
        const double* xr = px->value.ptr() + static_cast<std::size_t>(r) * nn;
        for (int col = 0; col < nn; ++col) a += gr[col] * xr[col];
        g.data[r] += a;
      }
    }
  });
}

}  // namespace vvmc
