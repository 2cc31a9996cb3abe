#include "vvmc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vvmc {

double mse_int(const Volume& a, const Volume& b) {
  if (a.width != b.width || a.height != b.height || a.depth != b.depth ||
      a.bit_depth != b.bit_depth)
    throw std::invalid_argument("mse: volume geometry mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    double d = static_cast<double>(a.samples[i]) - b.samples[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.samples.size());
}

double psnr_from_mse(double mse, double max_val) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_val * max_val / mse);
}

double psnr(const Volume& a, const Volume& b) {
  return psnr_from_mse(mse_int(a, b), static_cast<double>(a.max_value()));
}

// ---------------------------------------------------------------------------
// Bjontegaard deltas

namespace {

struct Poly3 {
  double c = 0, s = 1;  // basis t = (x - c)/s
  double a[4] = {0, 0, 0, 0};

  double integral(double lo, double hi) const {
    // antiderivative in t, dx = s dt
    auto F = [&](double x) {
      double t = (x - c) / s;
      return s * (a[0] * t + a[1] * t * t / 2 + a[2] * t * t * t / 3 +
                  a[3] * t * t * t * t / 4);
    };
    return F(hi) - F(lo);
  }
};

Poly3 fit_poly3(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  Poly3 p;
  double c = 0;
  for (double x : xs) c += x;
  c /= static_cast<double>(n);
  double s = 0;
  for (double x : xs) s = std::max(s, std::abs(x - c));
  if (s == 0) s = 1;
  p.c = c;
  p.s = s;

  // normal equations for the cubic basis in t
  double m[4][5] = {};
  for (std::size_t i = 0; i < n; ++i) {
    double t = (xs[i] - c) / s;
    double basis[4] = {1, t, t * t, t * t * t};
    for (int r = 0; r < 4; ++r) {
      for (int col = 0; col < 4; ++col) m[r][col] += basis[r] * basis[col];
      m[r][4] += basis[r] * ys[i];
    }
  }
  // gaussian elimination with partial pivoting
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    if (std::abs(m[piv][col]) < 1e-12)
      throw std::domain_error("bd fit: singular system (degenerate curve)");
    if (piv != col)
      for (int k = 0; k < 5; ++k) std::swap(m[piv][k], m[col][k]);
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      double f = m[r][col] / m[col][col];
      for (int k = col; k < 5; ++k) m[r][k] -= f * m[col][k];
    }
  }
  for (int r = 0; r < 4; ++r) p.a[r] = m[r][4] / m[r][r];
  return p;
}

// Fritsch-Carlson monotone hermite interpolant, integrated analytically
struct Pchip {
  std::vector<double> x, y, d;

  double integral(double lo, double hi) const {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      double a = std::max(lo, x[i]), b = std::min(hi, x[i + 1]);
      if (a >= b) continue;
      acc += segment_integral(i, a, b);
    }
    return acc;
  }

  double segment_integral(std::size_t i, double a, double b) const {
    double h = x[i + 1] - x[i];
    auto F = [&](double xx) {
      double t = (xx - x[i]) / h;
      double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
      // antiderivatives of the hermite basis
      double H00 = t - t3 + t4 / 2.0;
      double H10 = t2 / 2 - 2 * t3 / 3 + t4 / 4;
      double H01 = t3 - t4 / 2.0;
      double H11 = -t3 / 3 + t4 / 4;
      return h * (y[i] * H00 + h * d[i] * H10 + y[i + 1] * H01 + h * d[i + 1] * H11);
    };
    return F(b) - F(a);
  }
};

Pchip fit_pchip(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  Pchip p;
  p.x = xs;
  p.y = ys;
  p.d.assign(n, 0.0);
  std::vector<double> slope(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double h = xs[i + 1] - xs[i];
    if (h <= 0) throw std::domain_error("pchip: x must be strictly increasing");
    slope[i] = (ys[i + 1] - ys[i]) / h;
  }
  p.d[0] = slope[0];
  p.d[n - 1] = slope[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (slope[i - 1] * slope[i] <= 0) {
      p.d[i] = 0;
    } else {
      double h0 = xs[i] - xs[i - 1], h1 = xs[i + 1] - xs[i];
      double w1 = 2 * h1 + h0, w2 = h1 + 2 * h0;
      p.d[i] = (w1 + w2) / (w1 / slope[i - 1] + w2 / slope[i]);
    }
  }
  return p;
}

void validate_curve(const RdCurve& c, const char* which) {
  if (c.size() < 4)
    throw std::invalid_argument(std::string("bd: ") + which +
                                " curve needs >= 4 points");
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!(c[i].bpp > 0) || !std::isfinite(c[i].psnr))
      throw std::invalid_argument(std::string("bd: ") + which +
                                  " curve has invalid point");
    if (i && c[i].bpp <= c[i - 1].bpp)
      throw std::invalid_argument(std::string("bd: ") + which +
                                  " curve bpp must increase strictly");
  }
}

// sorted by the x axis used for the fit
void axes(const RdCurve& c, bool rate_on_y, std::vector<double>& xs,
          std::vector<double>& ys) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : c) {
    double lr = std::log10(p.bpp);
    if (rate_on_y)
      pts.emplace_back(p.psnr, lr);
    else
      pts.emplace_back(lr, p.psnr);
  }
  std::sort(pts.begin(), pts.end());
  xs.clear();
  ys.clear();
  for (auto& [x, y] : pts) {
    if (!xs.empty() && x <= xs.back())
      throw std::domain_error("bd: duplicate point on the integration axis");
    xs.push_back(x);
    ys.push_back(y);
  }
}

double bd_delta(const RdCurve& anchor, const RdCurve& test, bool rate_on_y,
                BdMode mode) {
  validate_curve(anchor, "anchor");
  validate_curve(test, "test");
  std::vector<double> xa, ya, xt, yt;
  axes(anchor, rate_on_y, xa, ya);
  axes(test, rate_on_y, xt, yt);
  double lo = std::max(xa.front(), xt.front());
  double hi = std::min(xa.back(), xt.back());
  if (!(hi > lo))
    throw std::domain_error("bd: curves do not overlap on the integration axis");
  double ia, it;
  if (mode == BdMode::cubic) {
    ia = fit_poly3(xa, ya).integral(lo, hi);
    it = fit_poly3(xt, yt).integral(lo, hi);
  } else {
    ia = fit_pchip(xa, ya).integral(lo, hi);
    it = fit_pchip(xt, yt).integral(lo, hi);
  }
  return (it - ia) / (hi - lo);
}

}  // namespace

double bd_rate(const RdCurve& anchor, const RdCurve& test, BdMode mode) {
  double delta_log_rate = bd_delta(anchor, test, /*rate_on_y=*/true, mode);
  return (std::pow(10.0, delta_log_rate) - 1.0) * 100.0;
}

double bd_psnr(const RdCurve& anchor, const RdCurve& test, BdMode mode) {
  return bd_delta(anchor, test, /*rate_on_y=*/false, mode);
}

// ---------------------------------------------------------------------------
// segmentation metrics

void LabelVolume::validate() const {
  if (width < 1 || height < 1 || depth < 1 || num_classes < 1)
    throw std::invalid_argument("label volume: bad geometry");
  if (labels.size() != numel())
    throw std::invalid_argument("label volume: label count mismatch");
  for (auto l : labels)
    if (l >= num_classes)
      throw std::invalid_argument("label volume: label exceeds class count");
}

LabelVolume LabelVolume::from_volume(const Volume& v, int num_classes) {
  LabelVolume lv;
  lv.width = v.width;
  lv.height = v.height;
  lv.depth = v.depth;
  lv.num_classes = num_classes;
  lv.labels = v.samples;
  lv.validate();
  return lv;
}

Volume LabelVolume::to_volume() const {
  validate();
  if (num_classes > 256)
    throw std::invalid_argument("label volume: too many classes for 8-bit carrier");
  Volume v;
  v.width = width;
  v.height = height;
  v.depth = depth;
  v.bit_depth = 8;
  v.samples = labels;
  return v;
}

double dice(const LabelVolume& pred, const LabelVolume& gt, int class_id) {
  if (pred.width != gt.width || pred.height != gt.height || pred.depth != gt.depth)
    throw std::invalid_argument("dice: geometry mismatch");
  std::size_t a = 0, b = 0, inter = 0;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    bool pa = pred.labels[i] == class_id;
    bool ga = gt.labels[i] == class_id;
    a += pa;
    b += ga;
    inter += pa && ga;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

namespace {

struct Voxel {
  int z, y, x;
};

std::vector<Voxel> boundary_voxels(const LabelVolume& v, int class_id) {
  std::vector<Voxel> out;
  auto is_fg = [&](int z, int y, int x) {
    if (z < 0 || z >= v.depth || y < 0 || y >= v.height || x < 0 || x >= v.width)
      return false;  // outside counts as background
    return v.at(z, y, x) == class_id;
  };
  for (int z = 0; z < v.depth; ++z)
    for (int y = 0; y < v.height; ++y)
      for (int x = 0; x < v.width; ++x) {
        if (!is_fg(z, y, x)) continue;
        if (!is_fg(z - 1, y, x) || !is_fg(z + 1, y, x) || !is_fg(z, y - 1, x) ||
            !is_fg(z, y + 1, x) || !is_fg(z, y, x - 1) || !is_fg(z, y, x + 1))
          out.push_back({z, y, x});
      }
  return out;
}

double percentile_linear(std::vector<double>& v, double q) {
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  double rank = q * static_cast<double>(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(rank);
  double frac = rank - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

double directed_p95(const std::vector<Voxel>& from, const std::vector<Voxel>& to,
                    const Spacing& sp) {
  std::vector<double> dists(from.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(from.size()); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) {
      double dz = (from[i].z - b.z) * sp.z;
      double dy = (from[i].y - b.y) * sp.y;
      double dx = (from[i].x - b.x) * sp.x;
      double d2 = dz * dz + dy * dy + dx * dx;
      if (d2 < best) best = d2;
    }
    dists[i] = std::sqrt(best);
  }
  return percentile_linear(dists, 0.95);
}

}  // namespace

double hd95(const LabelVolume& pred, const LabelVolume& gt, int class_id,
            const Spacing& spacing) {
  if (pred.width != gt.width || pred.height != gt.height || pred.depth != gt.depth)
    throw std::invalid_argument("hd95: geometry mismatch");
  auto ba = boundary_voxels(pred, class_id);
  auto bb = boundary_voxels(gt, class_id);
  if (ba.empty() && bb.empty()) return 0.0;
  if (ba.empty() || bb.empty()) {
    double dz = gt.depth * spacing.z, dy = gt.height * spacing.y,
           dx = gt.width * spacing.x;
    return std::sqrt(dz * dz + dy * dy + dx * dx);  // sentinel: diagonal
  }
  return std::max(directed_p95(ba, bb, spacing), directed_p95(bb, ba, spacing));
}

}  // namespace vvmc
