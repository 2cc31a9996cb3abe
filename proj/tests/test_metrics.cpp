#include <doctest.h>

#include <array>
#include <cmath>

#include "testing_util.hpp"
#include "vvmc/metrics.hpp"
#include "vvmc/synthetic.hpp"

using namespace vvmc;

namespace {

RdCurve sample_curve() {
  return {{0.25, 32.0}, {0.5, 35.0}, {1.0, 38.5}, {2.0, 41.0}};
}

LabelVolume empty_labels(int w, int h, int d, int classes = 2) {
  LabelVolume lv;
  lv.width = w;
  lv.height = h;
  lv.depth = d;
  lv.num_classes = classes;
  lv.labels.assign(lv.numel(), 0);
  return lv;
}

// exhaustive pairwise-distance oracle for hd95 on small volumes
double hd95_oracle(const LabelVolume& a, const LabelVolume& b, int cls,
                   const Spacing& sp = {}) {
  auto boundary = [&](const LabelVolume& v) {
    std::vector<std::array<double, 3>> out;
    auto fg = [&](int z, int y, int x) {
      if (z < 0 || z >= v.depth || y < 0 || y >= v.height || x < 0 || x >= v.width)
        return false;
      return v.at(z, y, x) == cls;
    };
    for (int z = 0; z < v.depth; ++z)
      for (int y = 0; y < v.height; ++y)
        for (int x = 0; x < v.width; ++x)
          if (fg(z, y, x) &&
              (!fg(z - 1, y, x) || !fg(z + 1, y, x) || !fg(z, y - 1, x) ||
               !fg(z, y + 1, x) || !fg(z, y, x - 1) || !fg(z, y, x + 1)))
            out.push_back({z * sp.z, y * sp.y, x * sp.x});
    return out;
  };
  auto pa = boundary(a), pb = boundary(b);
  if (pa.empty() && pb.empty()) return 0.0;
  if (pa.empty() || pb.empty()) {
    double dz = b.depth * sp.z, dy = b.height * sp.y, dx = b.width * sp.x;
    return std::sqrt(dz * dz + dy * dy + dx * dx);
  }
  auto percentile95 = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    double rank = 0.95 * static_cast<double>(v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(rank);
    double frac = rank - lo;
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] * (1 - frac) + v[lo + 1] * frac;
  };
  auto directed = [&](const auto& from, const auto& to) {
    std::vector<double> d;
    for (const auto& f : from) {
      double best = 1e300;
      for (const auto& t : to) {
        double dz = f[0] - t[0], dy = f[1] - t[1], dx = f[2] - t[2];
        best = std::min(best, dz * dz + dy * dy + dx * dx);
      }
      d.push_back(std::sqrt(best));
    }
    return percentile95(d);
  };
  return std::max(directed(pa, pb), directed(pb, pa));
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("psnr examples") {
  Volume a{2, 2, 1, 8, {10, 20, 30, 40}};
  CHECK(std::isinf(psnr(a, a)));

  // mse = max^2 -> 0 dB
  Volume z{1, 1, 1, 8, {0}};
  Volume m{1, 1, 1, 8, {255}};
  CHECK(psnr(z, m) == doctest::Approx(0.0).epsilon(1e-12));

  // 8-bit, mse 6.5025 -> 40 dB (65025 / 6.5025 = 10^4)
  CHECK(psnr_from_mse(6.5025, 255.0) == doctest::Approx(40.0).epsilon(1e-12));

  Volume wrong{2, 1, 1, 8, {0, 0}};
  CHECK_THROWS_AS(psnr(a, wrong), std::invalid_argument);
}

TEST_CASE("psnr decreases with noise variance (monte carlo)") {
  Rng rng(3);
  Volume base = make_textured_volume(5, 2, 32, 32);
  double prev = std::numeric_limits<double>::infinity();
  for (double noise : {2.0, 8.0, 24.0}) {
    Volume noisy = base;
    for (auto& s : noisy.samples) {
      double v = s + rng.normal(0.0, noise);
      s = static_cast<std::uint16_t>(std::clamp(v, 0.0, 255.0));
    }
    double p = psnr(base, noisy);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("bd self comparison is zero") {
  for (BdMode mode : {BdMode::cubic, BdMode::pchip}) {
    CHECK(bd_rate(sample_curve(), sample_curve(), mode) ==
          doctest::Approx(0.0).epsilon(1e-9));
    CHECK(bd_psnr(sample_curve(), sample_curve(), mode) ==
          doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("doubled rate at equal quality costs +100 percent") {
  RdCurve anchor = sample_curve();
  RdCurve twice = anchor;
  for (auto& p : twice) p.bpp *= 2.0;
  CHECK(bd_rate(anchor, twice) == doctest::Approx(100.0).epsilon(1e-3));
  CHECK(bd_rate(twice, anchor) == doctest::Approx(-50.0).epsilon(1e-3));
}

TEST_CASE("one extra dB at equal rate is +1 dB bd-psnr") {
  RdCurve anchor = sample_curve();
  RdCurve better = anchor;
  for (auto& p : better) p.psnr += 1.0;
  CHECK(bd_psnr(anchor, better) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("sign convention: dominating curve gets negative bd-rate") {
  RdCurve anchor = sample_curve();
  RdCurve better = anchor;
  for (auto& p : better) p.bpp *= 0.8;  // same quality, fewer bits
  CHECK(bd_rate(anchor, better) < 0.0);
}

TEST_CASE("bd input validation") {
  RdCurve anchor = sample_curve();
  RdCurve three(anchor.begin(), anchor.begin() + 3);
  CHECK_THROWS_AS(bd_rate(anchor, three), std::invalid_argument);

  RdCurve nonmono = anchor;
  std::swap(nonmono[1].bpp, nonmono[2].bpp);
  CHECK_THROWS_AS(bd_rate(anchor, nonmono), std::invalid_argument);

  RdCurve disjoint = anchor;
  for (auto& p : disjoint) p.psnr += 100.0;  // no quality overlap
  CHECK_THROWS_AS(bd_rate(anchor, disjoint), std::domain_error);
}

TEST_CASE("dice examples") {
  LabelVolume gt = empty_labels(10, 10, 1);
  for (int i = 0; i < 10; ++i) gt.at(0, 0, i) = 1;
  CHECK(dice(gt, gt, 1) == 1.0);

  LabelVolume other = empty_labels(10, 10, 1);
  for (int i = 0; i < 10; ++i) other.at(0, 5, i) = 1;
  CHECK(dice(gt, other, 1) == 0.0);

  // |A| = |B| = 100, overlap 50 -> 0.5
  LabelVolume a = empty_labels(20, 20, 1), b = empty_labels(20, 20, 1);
  for (int i = 0; i < 100; ++i) a.labels[i] = 1;
  for (int i = 50; i < 150; ++i) b.labels[i] = 1;
  CHECK(dice(a, b, 1) == doctest::Approx(0.5));

  // both empty -> 1
  CHECK(dice(empty_labels(4, 4, 1), empty_labels(4, 4, 1), 1) == 1.0);

  // symmetry
  CHECK(dice(a, b, 1) == dice(b, a, 1));
}

TEST_CASE("hd95 examples and oracle agreement") {
  // identical masks -> 0
  LabelVolume cube = empty_labels(8, 8, 8);
  for (int z = 2; z < 6; ++z)
    for (int y = 2; y < 6; ++y)
      for (int x = 2; x < 6; ++x) cube.at(z, y, x) = 1;
  CHECK(hd95(cube, cube, 1) == 0.0);

  // single voxels one unit apart
  LabelVolume va = empty_labels(8, 8, 8), vb = empty_labels(8, 8, 8);
  va.at(3, 3, 3) = 1;
  vb.at(3, 3, 4) = 1;
  CHECK(hd95(va, vb, 1) == doctest::Approx(1.0));

  // cube translated by (0,0,1) at unit spacing
  LabelVolume moved = empty_labels(8, 8, 8);
  for (int z = 3; z < 7; ++z)
    for (int y = 2; y < 6; ++y)
      for (int x = 2; x < 6; ++x) moved.at(z, y, x) = 1;
  CHECK(hd95(cube, moved, 1) == doctest::Approx(1.0));
  CHECK(hd95(cube, moved, 1) == doctest::Approx(hd95_oracle(cube, moved, 1)));

  // property: agreement with the exhaustive oracle on random small masks
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    LabelVolume p = empty_labels(12, 12, 12), g = empty_labels(12, 12, 12);
    for (int i = 0; i < 40; ++i) {
      p.labels[rng.uniform_int(static_cast<int>(p.numel()))] = 1;
      g.labels[rng.uniform_int(static_cast<int>(g.numel()))] = 1;
    }
    Spacing sp{1.5, 1.0, 0.75};
    CHECK(hd95(p, g, 1, sp) == doctest::Approx(hd95_oracle(p, g, 1, sp)).epsilon(1e-12));
    CHECK(hd95(p, g, 1, sp) == doctest::Approx(hd95(g, p, 1, sp)));  // symmetric
  }

  // empty-mask policy
  LabelVolume none = empty_labels(8, 8, 8);
  CHECK(hd95(none, none, 1) == 0.0);
  CHECK(hd95(cube, none, 1) == doctest::Approx(std::sqrt(3.0) * 8.0));
}

TEST_CASE("label volume carriers") {
  LabelVolume lv = empty_labels(4, 3, 2, 3);
  lv.at(0, 0, 0) = 2;
  Volume carrier = lv.to_volume();
  LabelVolume back = LabelVolume::from_volume(carrier, 3);
  CHECK(back.labels == lv.labels);

  LabelVolume bad = lv;
  bad.labels[0] = 7;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

}  // TEST_SUITE
