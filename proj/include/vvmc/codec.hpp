#pragma once

#include <string>
#include <vector>

#include "vvmc/container.hpp"
#include "vvmc/entropy.hpp"
#include "vvmc/model.hpp"
#include "vvmc/volume.hpp"

namespace vvmc {

struct CompatibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SliceStats {
  double y_bits = 0;
  double z_bits = 0;
  double total_bits() const { return y_bits + z_bits; }
  double bpp = 0;  // over padded slice pixels
};

struct EncodeStats {
  std::vector<SliceStats> slices;
  double total_bits() const {
    double t = 0;
    for (const auto& s : slices) t += s.total_bits();
    return t;
  }
};

// The recurrence is sequential by construction: one session drives one
// volume, slice by slice, resetting its buffer at group boundaries.
struct CodecSession {
  const Model* model = nullptr;
  VarMap pvars;
  Tensor buffer;  // F_{t-1}
  int slice_index = 0;
  int padded_h = 0, padded_w = 0;
  CdfCache cdf_cache;
  std::vector<CdfTable> z_tables;  // per hyper channel

  CodecSession(const Model& m, int padded_h, int padded_w);
  void reset_group();
};

struct DecodedSlice {
  Tensor x_hat;  // (1,H,W); empty in feature-only mode
  Tensor m_x;    // (F,H,W)
  Tensor f_t;    // (F,H,W) updated buffer
  Tensor y_hat;  // (M,H/16,W/16)
};

SliceChunk encode_slice(const Tensor& x, CodecSession& session,
                        SliceStats* stats = nullptr);
DecodedSlice decode_slice(const SliceChunk& chunk, CodecSession& session,
                          bool features_only = false);

// Position-serial oracle: decodes one symbol at a time, re-deriving (mu,
// sigma) from the symbol's declared conditioning set before every decode.
// Shares the conditional model, not the two-pass schedule. Leaves the
// session untouched.
Tensor decode_latents_serial_reference(const SliceChunk& chunk,
                                       const CodecSession& session);

BitstreamContainer encode_volume(const Volume& v, const Model& m,
                                 int gop_stride, EncodeStats* stats = nullptr);
Volume decode_volume(const BitstreamContainer& c, const Model& m,
                     std::vector<Tensor>* features = nullptr);
// never touches the reconstruction head
std::vector<Tensor> decode_features(const BitstreamContainer& c, const Model& m);

int pad_up(int v, int m);

}  // namespace vvmc
