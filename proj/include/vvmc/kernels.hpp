#pragma once

namespace vvmc::kernels {

// Every kernel comes in two flavors: a plain serial reference and an
// OpenMP-parallel version. Both accumulate in the same order per output
// element, so results are bitwise identical; tests assert exactly that and
// the decoder stays deterministic whatever OMP_NUM_THREADS is.
enum class Backend { serial, parallel };

Backend active_backend();
void set_backend(Backend b);

int conv_out_dim(int in, int k, int stride, int pad);
int convt_out_dim(int in, int k, int stride, int pad, int opad);

// x (Ci,H,W), w (Co,Ci,Kh,Kw), bias (Co) or nullptr, y (Co,Ho,Wo)
void conv2d_fwd(const double* x, int ci, int h, int w_, const double* w,
                int co, int kh, int kw, const double* bias, int stride,
                int pad, double* y, int ho, int wo);
void conv2d_bwd_input(const double* gy, int co, int ho, int wo, const double* w,
                      int ci, int kh, int kw, int stride, int pad, double* gx,
                      int h, int w_);
void conv2d_bwd_weight(const double* gy, int co, int ho, int wo, const double* x,
                       int ci, int h, int w_, int kh, int kw, int stride,
                       int pad, double* gw, double* gb);

// Transposed convolution, gather form. x (Ci,H,W), w (Ci,Co,Kh,Kw).
void convt2d_fwd(const double* x, int ci, int h, int w_, const double* w,
                 int co, int kh, int kw, const double* bias, int stride,
                 int pad, int opad, double* y, int ho, int wo);
void convt2d_bwd_input(const double* gy, int co, int ho, int wo, const double* w,
                       int ci, int kh, int kw, int stride, int pad, double* gx,
                       int h, int w_);
void convt2d_bwd_weight(const double* gy, int co, int ho, int wo, const double* x,
                        int ci, int h, int w_, int kh, int kw, int stride,
                        int pad, double* gw, double* gb);

// Generalized divisive normalization over channels, per spatial position.
// x (C,P) with P flattened spatial, beta (C), gamma (C,C).
// forward:  y_i = x_i / sqrt(d_i), d_i = beta_i + sum_j gamma_ij x_j^2
// inverse:  y_i = x_i * sqrt(d_i)
void gdn_fwd(const double* x, int c, int p, const double* beta,
             const double* gamma, bool inverse, double* y, double* denom);
void gdn_bwd(const double* gy, const double* x, const double* denom, int c,
             int p, const double* gamma, bool inverse, double* gx,
             double* gbeta, double* ggamma);

// (C*r^2, H, W) -> (C, H*r, W*r) and its adjoint.
void pixel_shuffle_fwd(const double* x, int c_out, int r, int h, int w,
                       double* y);
void pixel_shuffle_bwd(const double* gy, int c_out, int r, int h, int w,
                       double* gx);

}  // namespace vvmc::kernels
