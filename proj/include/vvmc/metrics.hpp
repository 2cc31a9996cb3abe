#pragma once

#include <cstdint>
#include <vector>

#include "vvmc/volume.hpp"

namespace vvmc {

struct RdPoint {
  double bpp = 0;
  double psnr = 0;
};
using RdCurve = std::vector<RdPoint>;

double mse_int(const Volume& a, const Volume& b);
// 10 log10(max^2 / mse); +inf when identical
double psnr(const Volume& a, const Volume& b);
double psnr_from_mse(double mse, double max_val);

enum class BdMode { cubic, pchip };

// Bjontegaard deltas over the overlapping quality / log-rate interval.
// Negative bd_rate means the test curve needs fewer bits than the anchor.
double bd_rate(const RdCurve& anchor, const RdCurve& test,
               BdMode mode = BdMode::cubic);
double bd_psnr(const RdCurve& anchor, const RdCurve& test,
               BdMode mode = BdMode::cubic);

struct LabelVolume {
  int width = 0;
  int height = 0;
  int depth = 0;
  int num_classes = 0;
  std::vector<std::uint16_t> labels;  // slice-major, row-major

  std::size_t numel() const {
    return static_cast<std::size_t>(width) * height * depth;
  }
  std::uint16_t at(int z, int y, int x) const {
    return labels[(static_cast<std::size_t>(z) * height + y) * width + x];
  }
  std::uint16_t& at(int z, int y, int x) {
    return labels[(static_cast<std::size_t>(z) * height + y) * width + x];
  }
  void validate() const;
  static LabelVolume from_volume(const Volume& v, int num_classes);
  Volume to_volume() const;  // bit_depth 8 carrier
};

// 2|A∩B| / (|A|+|B|); both empty -> 1
double dice(const LabelVolume& pred, const LabelVolume& gt, int class_id);

struct Spacing {
  double z = 1.0, y = 1.0, x = 1.0;
};

// Symmetric 95th percentile of boundary-to-boundary nearest distances
// (linear-interpolated percentile, max over the two directions). Boundary =
// foreground voxel with at least one background face neighbor; the outside
// of the volume counts as background. Exactly one empty mask returns the
// volume diagonal in spacing units; both empty returns 0.
double hd95(const LabelVolume& pred, const LabelVolume& gt, int class_id,
            const Spacing& spacing = {});

}  // namespace vvmc
