#include "vvmc/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace vvmc::kernels {

namespace {
Backend g_backend = Backend::parallel;

inline std::size_t idx3(int c, int y, int x, int h, int w) {
  return (static_cast<std::size_t>(c) * h + y) * w + x;
}
}  // namespace

Backend active_backend() { return g_backend; }
void set_backend(Backend b) { g_backend = b; }

int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

int convt_out_dim(int in, int k, int stride, int pad, int opad) {
  return (in - 1) * stride - 2 * pad + k + opad;
}

// ---------------------------------------------------------------------------
// conv2d forward

static void conv2d_fwd_serial(const double* x, int ci, int h, int w_,
                              const double* w, int co, int kh, int kw,
                              const double* bias, int stride, int pad,
                              double* y, int ho, int wo) {
  for (int oc = 0; oc < co; ++oc) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        double acc = bias ? bias[oc] : 0.0;
        for (int icc = 0; icc < ci; ++icc) {
          for (int ky = 0; ky < kh; ++ky) {
            int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w_) continue;
              acc += x[idx3(icc, iy, ix, h, w_)] *
                     w[((static_cast<std::size_t>(oc) * ci + icc) * kh + ky) * kw + kx];
            }
          }
        }
        y[idx3(oc, oy, ox, ho, wo)] = acc;
      }
    }
  }
}

static void conv2d_fwd_omp(const double* x, int ci, int h, int w_,
                           const double* w, int co, int kh, int kw,
                           const double* bias, int stride, int pad, double* y,
                           int ho, int wo) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < co; ++oc) {
    for (int oy = 0; oy < ho; ++oy) {
      int ky0 = std::max(0, pad - oy * stride);
      int ky1 = std::min(kh, h + pad - oy * stride);
      for (int ox = 0; ox < wo; ++ox) {
        int kx0 = std::max(0, pad - ox * stride);
        int kx1 = std::min(kw, w_ + pad - ox * stride);
        double acc = bias ? bias[oc] : 0.0;
        for (int icc = 0; icc < ci; ++icc) {
          const double* xc = x + static_cast<std::size_t>(icc) * h * w_;
          const double* wc =
              w + ((static_cast<std::size_t>(oc) * ci + icc) * kh) * kw;
          for (int ky = ky0; ky < ky1; ++ky) {
            const double* xr = xc + static_cast<std::size_t>(oy * stride - pad + ky) * w_ +
                               (ox * stride - pad);
            const double* wr = wc + static_cast<std::size_t>(ky) * kw;
            for (int kx = kx0; kx < kx1; ++kx) acc += xr[kx] * wr[kx];
          }
        }
        y[idx3(oc, oy, ox, ho, wo)] = acc;
      }
    }
  }
}

void conv2d_fwd(const double* x, int ci, int h, int w_, const double* w,
                int co, int kh, int kw, const double* bias, int stride,
                int pad, double* y, int ho, int wo) {
  if (g_backend == Backend::parallel)
    conv2d_fwd_omp(x, ci, h, w_, w, co, kh, kw, bias, stride, pad, y, ho, wo);
  else
    conv2d_fwd_serial(x, ci, h, w_, w, co, kh, kw, bias, stride, pad, y, ho, wo);
}

// ---------------------------------------------------------------------------
// conv2d backward w.r.t. input
//
// gx[ic,iy,ix] = sum over (oc,ky,kx) with oy*stride-pad+ky == iy etc.

static void conv2d_bwd_input_any(const double* gy, int co, int ho, int wo,
                                 const double* w, int ci, int kh, int kw,
                                 int stride, int pad, double* gx, int h,
                                 int w_, bool par) {
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int icc = 0; icc < ci; ++icc) {
    for (int iy = 0; iy < h; ++iy) {
      for (int ix = 0; ix < w_; ++ix) {
        double acc = 0.0;
        for (int oc = 0; oc < co; ++oc) {
          for (int ky = 0; ky < kh; ++ky) {
            int t = iy + pad - ky;
            if (t < 0 || t % stride) continue;
            int oy = t / stride;
            if (oy >= ho) continue;
            for (int kx = 0; kx < kw; ++kx) {
              int u = ix + pad - kx;
              if (u < 0 || u % stride) continue;
              int ox = u / stride;
              if (ox >= wo) continue;
              acc += gy[idx3(oc, oy, ox, ho, wo)] *
                     w[((static_cast<std::size_t>(oc) * ci + icc) * kh + ky) * kw + kx];
            }
          }
        }
        gx[idx3(icc, iy, ix, h, w_)] = acc;
      }
    }
  }
}

void conv2d_bwd_input(const double* gy, int co, int ho, int wo, const double* w,
                      int ci, int kh, int kw, int stride, int pad, double* gx,
                      int h, int w_) {
  conv2d_bwd_input_any(gy, co, ho, wo, w, ci, kh, kw, stride, pad, gx, h, w_,
                       g_backend == Backend::parallel);
}

// ---------------------------------------------------------------------------
// conv2d backward w.r.t. weight and bias

static void conv2d_bwd_weight_any(const double* gy, int co, int ho, int wo,
                                  const double* x, int ci, int h, int w_,
                                  int kh, int kw, int stride, int pad,
                                  double* gw, double* gb, bool par) {
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int oc = 0; oc < co; ++oc) {
    for (int icc = 0; icc < ci; ++icc) {
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          double acc = 0.0;
          for (int oy = 0; oy < ho; ++oy) {
            int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < wo; ++ox) {
              int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w_) continue;
              acc += gy[idx3(oc, oy, ox, ho, wo)] * x[idx3(icc, iy, ix, h, w_)];
            }
          }
          gw[((static_cast<std::size_t>(oc) * ci + icc) * kh + ky) * kw + kx] = acc;
        }
      }
    }
  }
  if (gb) {
#pragma omp parallel for schedule(static) if (par)
    for (int oc = 0; oc < co; ++oc) {
      double acc = 0.0;
      const double* g = gy + static_cast<std::size_t>(oc) * ho * wo;
      for (int i = 0; i < ho * wo; ++i) acc += g[i];
      gb[oc] = acc;
    }
  }
}

void conv2d_bwd_weight(const double* gy, int co, int ho, int wo, const double* x,
                       int ci, int h, int w_, int kh, int kw, int stride,
                       int pad, double* gw, double* gb) {
  conv2d_bwd_weight_any(gy, co, ho, wo, x, ci, h, w_, kh, kw, stride, pad, gw,
                        gb, g_backend == Backend::parallel);
}

// ---------------------------------------------------------------------------
// Transposed convolution. y[oc,oy,ox] gathers x[ic,(oy+pad-ky)/stride,...].

static void convt2d_fwd_any(const double* x, int ci, int h, int w_,
                            const double* w, int co, int kh, int kw,
                            const double* bias, int stride, int pad, int opad,
                            double* y, int ho, int wo, bool par) {
  (void)opad;
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int oc = 0; oc < co; ++oc) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        double acc = bias ? bias[oc] : 0.0;
        for (int icc = 0; icc < ci; ++icc) {
          for (int ky = 0; ky < kh; ++ky) {
            int t = oy + pad - ky;
            if (t < 0 || t % stride) continue;
            int iy = t / stride;
            if (iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              int u = ox + pad - kx;
              if (u < 0 || u % stride) continue;
              int ix = u / stride;
              if (ix >= w_) continue;
              acc += x[idx3(icc, iy, ix, h, w_)] *
                     w[((static_cast<std::size_t>(icc) * co + oc) * kh + ky) * kw + kx];
            }
          }
        }
        y[idx3(oc, oy, ox, ho, wo)] = acc;
      }
    }
  }
}

void convt2d_fwd(const double* x, int ci, int h, int w_, const double* w,
                 int co, int kh, int kw, const double* bias, int stride,
                 int pad, int opad, double* y, int ho, int wo) {
  convt2d_fwd_any(x, ci, h, w_, w, co, kh, kw, bias, stride, pad, opad, y, ho,
                  wo, g_backend == Backend::parallel);
}

static void convt2d_bwd_input_any(const double* gy, int co, int ho, int wo,
                                  const double* w, int ci, int kh, int kw,
                                  int stride, int pad, double* gx, int h,
                                  int w_, bool par) {
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int icc = 0; icc < ci; ++icc) {
    for (int iy = 0; iy < h; ++iy) {
      for (int ix = 0; ix < w_; ++ix) {
        double acc = 0.0;
        for (int oc = 0; oc < co; ++oc) {
          for (int ky = 0; ky < kh; ++ky) {
            int oy = iy * stride - pad + ky;
            if (oy < 0 || oy >= ho) continue;
            for (int kx = 0; kx < kw; ++kx) {
              int ox = ix * stride - pad + kx;
              if (ox < 0 || ox >= wo) continue;
              acc += gy[idx3(oc, oy, ox, ho, wo)] *
                     w[((static_cast<std::size_t>(icc) * co + oc) * kh + ky) * kw + kx];
            }
          }
        }
        gx[idx3(icc, iy, ix, h, w_)] = acc;
      }
    }
  }
}

void convt2d_bwd_input(const double* gy, int co, int ho, int wo, const double* w,
                       int ci, int kh, int kw, int stride, int pad, double* gx,
                       int h, int w_) {
  convt2d_bwd_input_any(gy, co, ho, wo, w, ci, kh, kw, stride, pad, gx, h, w_,
                        g_backend == Backend::parallel);
}

static void convt2d_bwd_weight_any(const double* gy, int co, int ho, int wo,
                                   const double* x, int ci, int h, int w_,
                                   int kh, int kw, int stride, int pad,
                                   double* gw, double* gb, bool par) {
#pragma omp parallel for collapse(2) schedule(static) if (par)
  for (int icc = 0; icc < ci; ++icc) {
    for (int oc = 0; oc < co; ++oc) {
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          double acc = 0.0;
          for (int iy = 0; iy < h; ++iy) {
            int oy = iy * stride - pad + ky;
            if (oy < 0 || oy >= ho) continue;
            for (int ix = 0; ix < w_; ++ix) {
              int ox = ix * stride - pad + kx;
              if (ox < 0 || ox >= wo) continue;
              acc += x[idx3(icc, iy, ix, h, w_)] * gy[idx3(oc, oy, ox, ho, wo)];
            }
          }
          gw[((static_cast<std::size_t>(icc) * co + oc) * kh + ky) * kw + kx] = acc;
        }
      }
    }
  }
  if (gb) {
#pragma omp parallel for schedule(static) if (par)
    for (int oc = 0; oc < co; ++oc) {
      double acc = 0.0;
      const double* g = gy + static_cast<std::size_t>(oc) * ho * wo;
      for (int i = 0; i < ho * wo; ++i) acc += g[i];
      gb[oc] = acc;
    }
  }
}

void convt2d_bwd_weight(const double* gy, int co, int ho, int wo, const double* x,
                        int ci, int h, int w_, int kh, int kw, int stride,
                        int pad, double* gw, double* gb) {
  convt2d_bwd_weight_any(gy, co, ho, wo, x, ci, h, w_, kh, kw, stride, pad, gw,
                         gb, g_backend == Backend::parallel);
}

// ---------------------------------------------------------------------------
// GDN / IGDN

void gdn_fwd(const double* x, int c, int p, const double* beta,
             const double* gamma, bool inverse, double* y, double* denom) {
  bool par = g_backend == Backend::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < c; ++i) {
    const double* gi = gamma + static_cast<std::size_t>(i) * c;
    double* di = denom + static_cast<std::size_t>(i) * p;
    for (int k = 0; k < p; ++k) di[k] = beta[i];
    for (int j = 0; j < c; ++j) {
      const double* xj = x + static_cast<std::size_t>(j) * p;
      double g = gi[j];
      for (int k = 0; k < p; ++k) di[k] += g * xj[k] * xj[k];
    }
    const double* xi = x + static_cast<std::size_t>(i) * p;
    double* yi = y + static_cast<std::size_t>(i) * p;
    if (inverse) {
      for (int k = 0; k < p; ++k) yi[k] = xi[k] * std::sqrt(di[k]);
    } else {
      for (int k = 0; k < p; ++k) yi[k] = xi[k] / std::sqrt(di[k]);
    }
  }
}

void gdn_bwd(const double* gy, const double* x, const double* denom, int c,
             int p, const double* gamma, bool inverse, double* gx,
             double* gbeta, double* ggamma) {
  bool par = g_backend == Backend::parallel;
  // u[i,k] = dL/ddenom[i,k]
  std::vector<double> u(static_cast<std::size_t>(c) * p);
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < c; ++i) {
    const double* gi = gy + static_cast<std::size_t>(i) * p;
    const double* xi = x + static_cast<std::size_t>(i) * p;
    const double* di = denom + static_cast<std::size_t>(i) * p;
    double* ui = u.data() + static_cast<std::size_t>(i) * p;
    if (inverse) {
      for (int k = 0; k < p; ++k)
        ui[k] = 0.5 * gi[k] * xi[k] / std::sqrt(di[k]);
    } else {
      for (int k = 0; k < p; ++k)
        ui[k] = -0.5 * gi[k] * xi[k] / (di[k] * std::sqrt(di[k]));
    }
  }
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < c; ++i) {
    const double* ui = u.data() + static_cast<std::size_t>(i) * p;
    double acc = 0.0;
    for (int k = 0; k < p; ++k) acc += ui[k];
    gbeta[i] = acc;
    double* ggi = ggamma + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) {
      const double* xj = x + static_cast<std::size_t>(j) * p;
      double a = 0.0;
      for (int k = 0; k < p; ++k) a += ui[k] * xj[k] * xj[k];
      ggi[j] = a;
    }
  }
#pragma omp parallel for schedule(static) if (par)
  for (int j = 0; j < c; ++j) {
    const double* gj = gy + static_cast<std::size_t>(j) * p;
    const double* xj = x + static_cast<std::size_t>(j) * p;
    const double* dj = denom + static_cast<std::size_t>(j) * p;
    double* gxj = gx + static_cast<std::size_t>(j) * p;
    if (inverse) {
      for (int k = 0; k < p; ++k) gxj[k] = gj[k] * std::sqrt(dj[k]);
    } else {
      for (int k = 0; k < p; ++k) gxj[k] = gj[k] / std::sqrt(dj[k]);
    }
    for (int i = 0; i < c; ++i) {
      double g = gamma[static_cast<std::size_t>(i) * c + j];
      if (g == 0.0) continue;
      const double* ui = u.data() + static_cast<std::size_t>(i) * p;
      for (int k = 0; k < p; ++k) gxj[k] += 2.0 * g * ui[k] * xj[k];
    }
  }
}

// ---------------------------------------------------------------------------
// PixelShuffle

void pixel_shuffle_fwd(const double* x, int c_out, int r, int h, int w,
                       double* y) {
  bool par = g_backend == Backend::parallel;
  int ho = h * r, wo = w * r;
#pragma omp parallel for schedule(static) if (par)
  for (int oc = 0; oc < c_out; ++oc) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        int icc = oc * r * r + (oy % r) * r + (ox % r);
        y[idx3(oc, oy, ox, ho, wo)] = x[idx3(icc, oy / r, ox / r, h, w)];
      }
    }
  }
}

void pixel_shuffle_bwd(const double* gy, int c_out, int r, int h, int w,
                       double* gx) {
  bool par = g_backend == Backend::parallel;
  int ho = h * r, wo = w * r;
#pragma omp parallel for schedule(static) if (par)
  for (int oc = 0; oc < c_out; ++oc) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        int icc = oc * r * r + (oy % r) * r + (ox % r);
        gx[idx3(icc, oy / r, ox / r, h, w)] = gy[idx3(oc, oy, ox, ho, wo)];
      }
    }
  }
}

}  // namespace vvmc::kernels
