#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vvmc {

struct SliceChunk {
  std::vector<std::uint8_t> z_bytes;  // hyper-latent payload, coded first
  std::vector<std::uint8_t> y_bytes;
};

// VVMC container: magic "VVMC" | version u8 | width u32 | height u32 |
// depth u32 | bit_depth u8 | gop_stride u16 | model_id u64 | groups u8 |
// latent_channels u16 | flags u8 (bit0 ckbd, bit1 chctx, bit2 aux) |
// depth x { z_len u32, z_bytes, y_len u32, y_bytes }. Little-endian
// throughout; chunk count equals depth.
struct BitstreamContainer {
  int width = 0;
  int height = 0;
  int depth = 0;
  int bit_depth = 8;
  int gop_stride = 16;
  std::uint64_t model_id = 0;
  int groups = 0;
  int latent_channels = 0;
  bool use_checkerboard = true;
  bool use_channel_ctx = true;
  bool use_auxiliary = true;
  std::vector<SliceChunk> chunks;

  std::size_t payload_bytes() const;
};

void write_container(const BitstreamContainer& c, const std::string& path);
BitstreamContainer read_container(const std::string& path);

}  // namespace vvmc
