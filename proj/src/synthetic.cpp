#include "vvmc/synthetic.hpp"

#include <cmath>

#include "vvmc/rng.hpp"

namespace vvmc {

namespace {
constexpr double kTau = 6.283185307179586476925286766559;

std::uint16_t to_u8(double v) {
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  return static_cast<std::uint16_t>(std::round(v * 255.0));
}
}  // namespace

Volume make_textured_volume(std::uint64_t seed, int depth, int h, int w) {
  Rng rng(seed);
  struct Wave {
    double fx, fy, fz, phase, amp;
  };
  Wave waves[4];
  for (auto& wv : waves) {
    wv.fx = rng.uniform(0.7, 2.5);
    wv.fy = rng.uniform(0.7, 2.5);
    wv.fz = rng.uniform(0.3, 1.0);  // slow along z: strong slice correlation
    wv.phase = rng.uniform(0.0, kTau);
    wv.amp = rng.uniform(0.08, 0.16);
  }
  Volume v;
  v.width = w;
  v.height = h;
  v.depth = depth;
  v.bit_depth = 8;
  v.samples.resize(v.numel());
  for (int z = 0; z < depth; ++z)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double val = 0.5;
        for (const auto& wv : waves)
          val += wv.amp * std::sin(kTau * (wv.fx * x / w + wv.fy * y / h +
                                           wv.fz * z / std::max(1, depth)) +
                                   wv.phase);
        val += rng.uniform(-0.03, 0.03);
        v.at(z, y, x) = to_u8(val);
      }
  return v;
}

Volume make_repeated_slice_volume(std::uint64_t seed, int depth, int h, int w) {
  Volume base = make_textured_volume(seed, 1, h, w);
  Volume v = base;
  v.depth = depth;
  v.samples.resize(v.numel());
  for (int z = 0; z < depth; ++z)
    std::copy(base.samples.begin(), base.samples.end(),
              v.samples.begin() + static_cast<std::size_t>(z) * h * w);
  return v;
}

ShapesSample make_shapes_volume(std::uint64_t seed, int depth, int h, int w) {
  Rng rng(seed);
  ShapesSample s;
  s.image.width = w;
  s.image.height = h;
  s.image.depth = depth;
  s.image.bit_depth = 8;
  s.image.samples.resize(s.image.numel());
  s.labels.width = w;
  s.labels.height = h;
  s.labels.depth = depth;
  s.labels.num_classes = 3;
  s.labels.labels.assign(s.labels.numel(), 0);

  double disk_cx = rng.uniform(0.30, 0.45) * w;
  double disk_cy = rng.uniform(0.25, 0.45) * h;
  double disk_r = rng.uniform(0.10, 0.16) * std::min(h, w);
  double rect_cx = rng.uniform(0.60, 0.75) * w;
  double rect_cy = rng.uniform(0.55, 0.75) * h;
  double rect_hw = rng.uniform(0.10, 0.15) * w;
  double rect_hh = rng.uniform(0.08, 0.14) * h;
  double drift_x = rng.uniform(-1.2, 1.2);
  double drift_y = rng.uniform(-1.2, 1.2);

  for (int z = 0; z < depth; ++z) {
    double dcx = disk_cx + drift_x * z;
    double dcy = disk_cy + drift_y * z;
    double rcx = rect_cx - drift_x * z;
    double rcy = rect_cy - drift_y * z;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double val = 0.12 + 0.06 * (static_cast<double>(y) / h);
        int label = 0;
        if (std::abs(x - rcx) <= rect_hw && std::abs(y - rcy) <= rect_hh) {
          val = 0.5;
          label = 2;
        }
        double dx = x - dcx, dy = y - dcy;
        if (dx * dx + dy * dy <= disk_r * disk_r) {
          val = 0.85;
          label = 1;
        }
        val += rng.uniform(-0.02, 0.02);
        s.image.at(z, y, x) = to_u8(val);
        s.labels.at(z, y, x) = static_cast<std::uint16_t>(label);
      }
  }
  return s;
}

}  // namespace vvmc
