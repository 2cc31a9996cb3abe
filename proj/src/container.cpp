#include "vvmc/container.hpp"

#include <cstring>
#include <fstream>

#include "vvmc/volume.hpp"

namespace vvmc {

namespace {
constexpr char kMagic[4] = {'V', 'V', 'M', 'C'};
constexpr std::uint8_t kVersion = 1;

void w16(std::ostream& os, std::uint16_t v) {
  os.put(static_cast<char>(v & 0xff));
  os.put(static_cast<char>(v >> 8));
}
void w32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
void w64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint16_t r16(std::istream& is) {
  int a = is.get(), b = is.get();
  if (a < 0 || b < 0) throw IoError("vvmc: truncated header");
  return static_cast<std::uint16_t>(a | (b << 8));
}
std::uint32_t r32(std::istream& is) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    int b = is.get();
    if (b < 0) throw IoError("vvmc: truncated header");
    v |= static_cast<std::uint32_t>(b) << (8 * i);
  }
  return v;
}
std::uint64_t r64(std::istream& is) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    int b = is.get();
    if (b < 0) throw IoError("vvmc: truncated header");
    v |= static_cast<std::uint64_t>(b) << (8 * i);
  }
  return v;
}
}  // namespace

std::size_t BitstreamContainer::payload_bytes() const {
  std::size_t n = 0;
  for (const auto& c : chunks) n += c.z_bytes.size() + c.y_bytes.size();
  return n;
}

void write_container(const BitstreamContainer& c, const std::string& path) {
  if (static_cast<int>(c.chunks.size()) != c.depth)
    throw FormatError("vvmc: chunk count must equal depth");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("vvmc: cannot write " + path);
  os.write(kMagic, 4);
  os.put(static_cast<char>(kVersion));
  w32(os, static_cast<std::uint32_t>(c.width));
  w32(os, static_cast<std::uint32_t>(c.height));
  w32(os, static_cast<std::uint32_t>(c.depth));
  os.put(static_cast<char>(c.bit_depth));
  w16(os, static_cast<std::uint16_t>(c.gop_stride));
  w64(os, c.model_id);
  os.put(static_cast<char>(c.groups));
  w16(os, static_cast<std::uint16_t>(c.latent_channels));
  std::uint8_t flags = (c.use_checkerboard ? 1 : 0) |
                       (c.use_channel_ctx ? 2 : 0) | (c.use_auxiliary ? 4 : 0);
  os.put(static_cast<char>(flags));
  for (const auto& ch : c.chunks) {
    w32(os, static_cast<std::uint32_t>(ch.z_bytes.size()));
    os.write(reinterpret_cast<const char*>(ch.z_bytes.data()),
             static_cast<std::streamsize>(ch.z_bytes.size()));
    w32(os, static_cast<std::uint32_t>(ch.y_bytes.size()));
    os.write(reinterpret_cast<const char*>(ch.y_bytes.data()),
             static_cast<std::streamsize>(ch.y_bytes.size()));
  }
  if (!os) throw IoError("vvmc: write failed " + path);
}

BitstreamContainer read_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("vvmc: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("vvmc: bad magic in " + path);
  int version = is.get();
  if (version != kVersion) throw FormatError("vvmc: unsupported version");

  BitstreamContainer c;
  c.width = static_cast<int>(r32(is));
  c.height = static_cast<int>(r32(is));
  c.depth = static_cast<int>(r32(is));
  c.bit_depth = is.get();
  c.gop_stride = r16(is);
  c.model_id = r64(is);
  c.groups = is.get();
  c.latent_channels = r16(is);
  int flags = is.get();
  if (flags < 0) throw IoError("vvmc: truncated header");
  c.use_checkerboard = flags & 1;
  c.use_channel_ctx = flags & 2;
  c.use_auxiliary = flags & 4;
  if (c.width < 1 || c.height < 1 || c.depth < 1)
    throw FormatError("vvmc: bad dimensions");
  if (c.bit_depth != 8 && c.bit_depth != 16)
    throw FormatError("vvmc: bad bit depth");
  if (c.gop_stride < 1) throw FormatError("vvmc: bad gop stride");

  c.chunks.resize(c.depth);
  for (auto& ch : c.chunks) {
    std::uint32_t zl = r32(is);
    ch.z_bytes.resize(zl);
    is.read(reinterpret_cast<char*>(ch.z_bytes.data()), zl);
    std::uint32_t yl = r32(is);
    ch.y_bytes.resize(yl);
    is.read(reinterpret_cast<char*>(ch.y_bytes.data()), yl);
    if (!is) throw IoError("vvmc: truncated chunk");
  }
  return c;
}

}  // namespace vvmc
