#include <doctest.h>

#include "testing_util.hpp"
#include "vvmc/kernels.hpp"

using namespace vvmc;
namespace k = vvmc::kernels;

namespace {

struct BackendGuard {
  k::Backend saved = k::active_backend();
  ~BackendGuard() { k::set_backend(saved); }
};

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("conv output dims") {
  CHECK(k::conv_out_dim(64, 5, 2, 2) == 32);
  CHECK(k::conv_out_dim(64, 3, 1, 1) == 64);
  CHECK(k::conv_out_dim(64, 3, 2, 1) == 32);
  CHECK(k::convt_out_dim(32, 5, 2, 2, 1) == 64);
  CHECK(k::convt_out_dim(32, 3, 2, 1, 1) == 64);
}

TEST_CASE("parallel matches serial bitwise") {
  BackendGuard guard;
  Rng rng(7);

  struct Case {
    int ci, h, w, co, kh, stride, pad;
  };
  for (const Case& c : {Case{3, 17, 13, 5, 5, 2, 2}, Case{4, 16, 16, 4, 3, 1, 1},
                        Case{1, 9, 9, 8, 5, 2, 2}, Case{6, 8, 8, 2, 1, 1, 0}}) {
    Tensor x = testing::random_tensor({c.ci, c.h, c.w}, rng);
    Tensor w = testing::random_tensor({c.co, c.ci, c.kh, c.kh}, rng, 0.3);
    Tensor b = testing::random_tensor({c.co}, rng);
    int ho = k::conv_out_dim(c.h, c.kh, c.stride, c.pad);
    int wo = k::conv_out_dim(c.w, c.kh, c.stride, c.pad);
    Tensor ys({c.co, ho, wo}), yp({c.co, ho, wo});

    k::set_backend(k::Backend::serial);
    k::conv2d_fwd(x.ptr(), c.ci, c.h, c.w, w.ptr(), c.co, c.kh, c.kh, b.ptr(),
                  c.stride, c.pad, ys.ptr(), ho, wo);
    k::set_backend(k::Backend::parallel);
    k::conv2d_fwd(x.ptr(), c.ci, c.h, c.w, w.ptr(), c.co, c.kh, c.kh, b.ptr(),
                  c.stride, c.pad, yp.ptr(), ho, wo);
    CHECK(bitwise_equal(ys, yp));

    Tensor gy = testing::random_tensor({c.co, ho, wo}, rng);
    Tensor gxs({c.ci, c.h, c.w}), gxp({c.ci, c.h, c.w});
    k::set_backend(k::Backend::serial);
    k::conv2d_bwd_input(gy.ptr(), c.co, ho, wo, w.ptr(), c.ci, c.kh, c.kh,
                        c.stride, c.pad, gxs.ptr(), c.h, c.w);
    k::set_backend(k::Backend::parallel);
    k::conv2d_bwd_input(gy.ptr(), c.co, ho, wo, w.ptr(), c.ci, c.kh, c.kh,
                        c.stride, c.pad, gxp.ptr(), c.h, c.w);
    CHECK(bitwise_equal(gxs, gxp));

    Tensor gws({c.co, c.ci, c.kh, c.kh}), gwp({c.co, c.ci, c.kh, c.kh});
    Tensor gbs({c.co}), gbp({c.co});
    k::set_backend(k::Backend::serial);
    k::conv2d_bwd_weight(gy.ptr(), c.co, ho, wo, x.ptr(), c.ci, c.h, c.w, c.kh,
                         c.kh, c.stride, c.pad, gws.ptr(), gbs.ptr());
    k::set_backend(k::Backend::parallel);
    k::conv2d_bwd_weight(gy.ptr(), c.co, ho, wo, x.ptr(), c.ci, c.h, c.w, c.kh,
                         c.kh, c.stride, c.pad, gwp.ptr(), gbp.ptr());
    CHECK(bitwise_equal(gws, gwp));
    CHECK(bitwise_equal(gbs, gbp));
  }
}

TEST_CASE("transposed conv parallel matches serial bitwise") {
  BackendGuard guard;
  Rng rng(11);
  int ci = 3, h = 9, w = 7, co = 4, kh = 5, stride = 2, pad = 2, opad = 1;
  Tensor x = testing::random_tensor({ci, h, w}, rng);
  Tensor wt = testing::random_tensor({ci, co, kh, kh}, rng, 0.3);
  Tensor b = testing::random_tensor({co}, rng);
  int ho = k::convt_out_dim(h, kh, stride, pad, opad);
  int wo = k::convt_out_dim(w, kh, stride, pad, opad);
  Tensor ys({co, ho, wo}), yp({co, ho, wo});
  k::set_backend(k::Backend::serial);
  k::convt2d_fwd(x.ptr(), ci, h, w, wt.ptr(), co, kh, kh, b.ptr(), stride, pad,
                 opad, ys.ptr(), ho, wo);
  k::set_backend(k::Backend::parallel);
  k::convt2d_fwd(x.ptr(), ci, h, w, wt.ptr(), co, kh, kh, b.ptr(), stride, pad,
                 opad, yp.ptr(), ho, wo);
  CHECK(bitwise_equal(ys, yp));

  Tensor gy = testing::random_tensor({co, ho, wo}, rng);
  Tensor gxs({ci, h, w}), gxp({ci, h, w});
  k::set_backend(k::Backend::serial);
  k::convt2d_bwd_input(gy.ptr(), co, ho, wo, wt.ptr(), ci, kh, kh, stride, pad,
                       gxs.ptr(), h, w);
  k::set_backend(k::Backend::parallel);
  k::convt2d_bwd_input(gy.ptr(), co, ho, wo, wt.ptr(), ci, kh, kh, stride, pad,
                       gxp.ptr(), h, w);
  CHECK(bitwise_equal(gxs, gxp));

  Tensor gws({ci, co, kh, kh}), gwp({ci, co, kh, kh}), gbs({co}), gbp({co});
  k::set_backend(k::Backend::serial);
  k::convt2d_bwd_weight(gy.ptr(), co, ho, wo, x.ptr(), ci, h, w, kh, kh, stride,
                        pad, gws.ptr(), gbs.ptr());
  k::set_backend(k::Backend::parallel);
  k::convt2d_bwd_weight(gy.ptr(), co, ho, wo, x.ptr(), ci, h, w, kh, kh, stride,
                        pad, gwp.ptr(), gbp.ptr());
  CHECK(bitwise_equal(gws, gwp));
  CHECK(bitwise_equal(gbs, gbp));
}

TEST_CASE("gdn parallel matches serial bitwise") {
  BackendGuard guard;
  Rng rng(13);
  int c = 6, p = 40;
  Tensor x = testing::random_tensor({c, p}, rng);
  Tensor beta({c}, 1.0);
  Tensor gamma = testing::random_tensor({c, c}, rng, 0.1);
  for (double& v : gamma.data) v = v * v;

  for (bool inverse : {false, true}) {
    Tensor ys({c, p}), yp({c, p}), ds({c, p}), dp({c, p});
    k::set_backend(k::Backend::serial);
    k::gdn_fwd(x.ptr(), c, p, beta.ptr(), gamma.ptr(), inverse, ys.ptr(), ds.ptr());
    k::set_backend(k::Backend::parallel);
    k::gdn_fwd(x.ptr(), c, p, beta.ptr(), gamma.ptr(), inverse, yp.ptr(), dp.ptr());
    CHECK(bitwise_equal(ys, yp));

    Tensor gy = testing::random_tensor({c, p}, rng);
    Tensor gxs({c, p}), gxp({c, p}), gbs({c}), gbp({c}), ggs({c, c}), ggp({c, c});
    k::set_backend(k::Backend::serial);
    k::gdn_bwd(gy.ptr(), x.ptr(), ds.ptr(), c, p, gamma.ptr(), inverse,
               gxs.ptr(), gbs.ptr(), ggs.ptr());
    k::set_backend(k::Backend::parallel);
    k::gdn_bwd(gy.ptr(), x.ptr(), dp.ptr(), c, p, gamma.ptr(), inverse,
               gxp.ptr(), gbp.ptr(), ggp.ptr());
    CHECK(bitwise_equal(gxs, gxp));
    CHECK(bitwise_equal(gbs, gbp));
    CHECK(bitwise_equal(ggs, ggp));
  }
}

TEST_CASE("pixel shuffle round trip") {
  Rng rng(17);
  int c = 8, h = 5, w = 3, r = 2;
  Tensor x = testing::random_tensor({c, h, w}, rng);
  Tensor y({c / (r * r), h * r, w * r});
  k::pixel_shuffle_fwd(x.ptr(), c / (r * r), r, h, w, y.ptr());
  Tensor back({c, h, w});
  k::pixel_shuffle_bwd(y.ptr(), c / (r * r), r, h, w, back.ptr());
  CHECK(bitwise_equal(x, back));
}

}  // TEST_SUITE
