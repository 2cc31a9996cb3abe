#pragma once

#include "vvmc/metrics.hpp"
#include "vvmc/volume.hpp"

namespace vvmc {

// Smooth 3-D waves plus per-voxel noise; slices are strongly correlated
// along z but never identical.
Volume make_textured_volume(std::uint64_t seed, int depth, int h, int w);

// One textured slice replicated depth times.
Volume make_repeated_slice_volume(std::uint64_t seed, int depth, int h, int w);

// Bright disk (class 1) and dimmer rectangle (class 2) drifting across
// slices on a dark background.
struct ShapesSample {
  Volume image;
  LabelVolume labels;
};
ShapesSample make_shapes_volume(std::uint64_t seed, int depth, int h, int w);

}  // namespace vvmc
