#include "vvmc/volume.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace vvmc {

namespace {
constexpr char kMagic[4] = {'V', 'V', 'O', 'L'};
constexpr std::uint8_t kVersion = 1;

void write_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("vvol: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void Volume::validate() const {
  if (width < 1 || height < 1 || depth < 1)
    throw FormatError("volume: dimensions must be >= 1");
  if (bit_depth != 8 && bit_depth != 16)
    throw FormatError("volume: bit_depth must be 8 or 16");
  if (samples.size() != numel())
    throw FormatError("volume: sample count mismatch");
  const int limit = max_value();
  for (std::uint16_t s : samples)
    if (s > limit) throw FormatError("volume: sample exceeds bit depth");
}

Volume load_vvol(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("vvol: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("vvol: bad magic in " + path);
  std::uint8_t version = 0, bit_depth = 0;
  is.read(reinterpret_cast<char*>(&version), 1);
  is.read(reinterpret_cast<char*>(&bit_depth), 1);
  if (!is) throw IoError("vvol: truncated header");
  if (version != kVersion) throw FormatError("vvol: unsupported version");
  if (bit_depth != 8 && bit_depth != 16)
    throw FormatError("vvol: bit_depth must be 8 or 16");

  Volume v;
  v.bit_depth = bit_depth;
  v.width = static_cast<int>(read_u32le(is));
  v.height = static_cast<int>(read_u32le(is));
  v.depth = static_cast<int>(read_u32le(is));
  if (v.width < 1 || v.height < 1 || v.depth < 1)
    throw FormatError("vvol: bad dimensions");

  std::size_t n = v.numel();
  v.samples.resize(n);
  if (bit_depth == 8) {
    std::vector<unsigned char> raw(n);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
      throw IoError("vvol: truncated payload");
    for (std::size_t i = 0; i < n; ++i) v.samples[i] = raw[i];
  } else {
    std::vector<unsigned char> raw(n * 2);
    is.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(n * 2));
    if (static_cast<std::size_t>(is.gcount()) != n * 2)
      throw IoError("vvol: truncated payload");
    for (std::size_t i = 0; i < n; ++i)
      v.samples[i] = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
  }
  v.validate();
  return v;
}

void save_vvol(const Volume& v, const std::string& path) {
  v.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("vvol: cannot write " + path);
  os.write(kMagic, 4);
  os.put(static_cast<char>(kVersion));
  os.put(static_cast<char>(v.bit_depth));
  write_u32le(os, static_cast<std::uint32_t>(v.width));
  write_u32le(os, static_cast<std::uint32_t>(v.height));
  write_u32le(os, static_cast<std::uint32_t>(v.depth));
  if (v.bit_depth == 8) {
    std::vector<unsigned char> raw(v.samples.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
      raw[i] = static_cast<unsigned char>(v.samples[i]);
    os.write(reinterpret_cast<const char*>(raw.data()),
             static_cast<std::streamsize>(raw.size()));
  } else {
    std::vector<unsigned char> raw(v.samples.size() * 2);
    for (std::size_t i = 0; i < v.samples.size(); ++i) {
      raw[2 * i] = static_cast<unsigned char>(v.samples[i] & 0xff);
      raw[2 * i + 1] = static_cast<unsigned char>(v.samples[i] >> 8);
    }
    os.write(reinterpret_cast<const char*>(raw.data()),
             static_cast<std::streamsize>(raw.size()));
  }
  if (!os) throw IoError("vvol: write failed " + path);
}

Tensor normalize_slice(const Volume& v, int z) {
  Tensor t({1, v.height, v.width});
  const double scale = 1.0 / v.max_value();
  const std::uint16_t* src =
      v.samples.data() + static_cast<std::size_t>(z) * v.height * v.width;
  for (std::size_t i = 0; i < static_cast<std::size_t>(v.height) * v.width; ++i)
    t.data[i] = src[i] * scale;
  return t;
}

std::vector<Tensor> normalize(const Volume& v) {
  v.validate();
  std::vector<Tensor> out;
  out.reserve(v.depth);
  for (int z = 0; z < v.depth; ++z) out.push_back(normalize_slice(v, z));
  return out;
}

std::vector<std::uint16_t> denormalize(const Tensor& slice, int bit_depth) {
  const double maxv = (1 << bit_depth) - 1;
  std::vector<std::uint16_t> out(slice.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double r = std::round(slice.data[i] * maxv);  // half away from zero
    if (r < 0.0) r = 0.0;
    if (r > maxv) r = maxv;
    out[i] = static_cast<std::uint16_t>(r);
  }
  return out;
}

std::pair<Tensor, CropRecord> pad_to_multiple(const Tensor& slice, int m) {
  const int h = slice.dim(1), w = slice.dim(2);
  const int hp = ((h + m - 1) / m) * m;
  const int wp = ((w + m - 1) / m) * m;
  CropRecord rec{h, w};
  if (hp == h && wp == w) return {slice, rec};
  Tensor out({1, hp, wp});
  for (int y = 0; y < hp; ++y) {
    int sy = y < h ? y : h - 1;
    for (int x = 0; x < wp; ++x) {
      int sx = x < w ? x : w - 1;
      out.at3(0, y, x) = slice.at3(0, sy, sx);
    }
  }
  return {std::move(out), rec};
}

Tensor crop_slice(const Tensor& slice, const CropRecord& rec) {
  const int c = slice.dim(0);
  if (slice.dim(1) == rec.height && slice.dim(2) == rec.width) return slice;
  Tensor out({c, rec.height, rec.width});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < rec.height; ++y)
      for (int x = 0; x < rec.width; ++x)
        out.at3(ch, y, x) = slice.at3(ch, y, x);
  return out;
}

std::vector<SliceGroup> group_slices(const std::vector<Tensor>& slices,
                                     int gop_stride, const CropRecord& crop) {
  if (gop_stride < 1) throw std::invalid_argument("group_slices: stride >= 1");
  std::vector<SliceGroup> groups;
  for (std::size_t i = 0; i < slices.size(); i += gop_stride) {
    SliceGroup g;
    g.group_index = static_cast<int>(groups.size());
    g.crop = crop;
    for (std::size_t j = i; j < slices.size() && j < i + gop_stride; ++j)
      g.slices.push_back(slices[j]);
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace vvmc
