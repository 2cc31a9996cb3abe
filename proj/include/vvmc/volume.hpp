#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vvmc/tensor.hpp"

namespace vvmc {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Volumetric grayscale data, slice-major then row-major.
// VVOL container: magic "VVOL" | version u8 (=1) | bit_depth u8 |
// width u32le | height u32le | depth u32le | raw little-endian samples
// (u8 for bit_depth 8, u16le for bit_depth 16).
struct Volume {
  int width = 0;
  int height = 0;
  int depth = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;

  std::size_t numel() const {
    return static_cast<std::size_t>(width) * height * depth;
  }
  std::uint16_t& at(int z, int y, int x) {
    return samples[(static_cast<std::size_t>(z) * height + y) * width + x];
  }
  std::uint16_t at(int z, int y, int x) const {
    return samples[(static_cast<std::size_t>(z) * height + y) * width + x];
  }
  int max_value() const { return (1 << bit_depth) - 1; }
  void validate() const;  // throws FormatError on invariant violation
};

Volume load_vvol(const std::string& path);
void save_vvol(const Volume& v, const std::string& path);

// original (height,width) before padding
struct CropRecord {
  int height = 0;
  int width = 0;
};

struct SliceGroup {
  std::vector<Tensor> slices;  // (1,H,W) each, padded
  int group_index = 0;
  CropRecord crop;
};

// sample / (2^bit_depth - 1), one (1,H,W) tensor per slice
std::vector<Tensor> normalize(const Volume& v);
Tensor normalize_slice(const Volume& v, int z);

// clamp(round(value * (2^bit_depth - 1)), 0, max); round half away from zero
std::vector<std::uint16_t> denormalize(const Tensor& slice, int bit_depth);

// replicate edges so both dims become the smallest multiples of m
std::pair<Tensor, CropRecord> pad_to_multiple(const Tensor& slice, int m);
Tensor crop_slice(const Tensor& slice, const CropRecord& rec);

std::vector<SliceGroup> group_slices(const std::vector<Tensor>& slices,
                                     int gop_stride, const CropRecord& crop);

}  // namespace vvmc
