#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "testing_util.hpp"
#include "vvmc/codec.hpp"
#include "vvmc/synthetic.hpp"

using namespace vvmc;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

Model tiny_model(std::uint64_t seed = 7) {
  return Model::init(ModelConfig::tiny(), seed);
}

}  // namespace

TEST_SUITE("codec") {

TEST_CASE("slice round trip keeps buffers in lockstep") {
  Model m = tiny_model();
  const int hw = 64;
  Volume v = make_textured_volume(3, 4, hw, hw);
  auto slices = normalize(v);

  CodecSession enc(m, hw, hw);
  CodecSession dec(m, hw, hw);
  for (int t = 0; t < v.depth; ++t) {
    SliceStats st;
    SliceChunk chunk = encode_slice(slices[t], enc, &st);
    DecodedSlice d = decode_slice(chunk, dec);
    CHECK(enc.buffer.data == dec.buffer.data);  // bitwise
    CHECK(d.m_x.shape == std::vector<int>{m.cfg.buffer_channels, hw, hw});
    CHECK(d.x_hat.shape == std::vector<int>{1, hw, hw});
    CHECK(st.bpp == doctest::Approx((st.y_bits + st.z_bits) / (hw * hw)));
    CHECK(st.total_bits() ==
          doctest::Approx(8.0 * (chunk.y_bytes.size() + chunk.z_bytes.size())));
  }
}

TEST_CASE("first slice of a group uses the all-zero buffer") {
  Model m = tiny_model();
  const int hw = 32;
  CodecSession s(m, hw, hw);
  for (double v : s.buffer.data) CHECK(v == 0.0);
  Tensor x = normalize(make_textured_volume(5, 1, hw, hw))[0];
  encode_slice(x, s);
  bool nonzero = false;
  for (double v : s.buffer.data) nonzero |= v != 0.0;
  CHECK(nonzero);
  s.reset_group();
  for (double v : s.buffer.data) CHECK(v == 0.0);
  CHECK(s.slice_index == 0);
}

TEST_CASE("volume round trip, determinism, feature mode") {
  Model m = tiny_model();
  Volume v = make_textured_volume(11, 5, 48, 40);  // exercises padding
  EncodeStats stats;
  BitstreamContainer c = encode_volume(v, m, 4, &stats);
  CHECK(static_cast<int>(c.chunks.size()) == v.depth);
  CHECK(stats.slices.size() == static_cast<std::size_t>(v.depth));

  Volume r1 = decode_volume(c, m);
  Volume r2 = decode_volume(c, m);
  CHECK(r1.width == v.width);
  CHECK(r1.height == v.height);
  CHECK(r1.depth == v.depth);
  CHECK(r1.samples == r2.samples);  // deterministic decode

  auto before = instrumentation::reconstruct_calls.load();
  auto feats = decode_features(c, m);
  CHECK(instrumentation::reconstruct_calls.load() == before);  // no pixel head
  REQUIRE(static_cast<int>(feats.size()) == v.depth);
  CHECK(feats[0].shape == std::vector<int>{m.cfg.buffer_channels, 48, 48});

  // features match the ones captured during pixel decode
  std::vector<Tensor> feats_pixel;
  decode_volume(c, m, &feats_pixel);
  for (int i = 0; i < v.depth; ++i)
    CHECK(feats[i].data == feats_pixel[i].data);
}

TEST_CASE("container io round trip and tamper behavior") {
  Model m = tiny_model();
  Volume v = make_textured_volume(13, 3, 32, 32);
  BitstreamContainer c = encode_volume(v, m, 16);
  auto path = tmp_path("t.vvmc");
  write_container(c, path);
  BitstreamContainer r = read_container(path);
  CHECK(r.width == c.width);
  CHECK(r.model_id == c.model_id);
  CHECK(r.chunks.size() == c.chunks.size());
  for (std::size_t i = 0; i < c.chunks.size(); ++i) {
    CHECK(r.chunks[i].z_bytes == c.chunks[i].z_bytes);
    CHECK(r.chunks[i].y_bytes == c.chunks[i].y_bytes);
  }

  // header alone reports dims without decoding payloads
  CHECK(r.depth == 3);
  CHECK(r.payload_bytes() == c.payload_bytes());

  // bad magic
  {
    std::ofstream os(path, std::ios::binary);
    os << "JUNKJUNKJUNK";
  }
  CHECK_THROWS_AS(read_container(path), FormatError);
  std::remove(path.c_str());

  // flipping payload bytes must never crash: either a decode error or a
  // (possibly mismatched) reconstruction
  Rng rng(17);
  for (int trial = 0; trial < 6; ++trial) {
    BitstreamContainer tampered = c;
    auto& bytes = trial % 2 ? tampered.chunks[trial % 3].y_bytes
                            : tampered.chunks[trial % 3].z_bytes;
    if (bytes.empty()) continue;
    bytes[rng.uniform_int(static_cast<int>(bytes.size()))] ^=
        static_cast<std::uint8_t>(1 << rng.uniform_int(8));
    try {
      Volume out = decode_volume(tampered, m);
      CHECK(out.samples.size() == v.numel());
    } catch (const DecodeError&) {
    } catch (const FormatError&) {
    }
  }
}

TEST_CASE("model id mismatch is rejected") {
  Model m1 = tiny_model(1), m2 = tiny_model(2);
  Volume v = make_textured_volume(19, 2, 32, 32);
  BitstreamContainer c = encode_volume(v, m1, 16);
  CHECK_THROWS_AS(decode_volume(c, m2), CompatibilityError);
}

TEST_CASE("single-slice volume decodes standalone") {
  Model m = tiny_model();
  Volume v = make_textured_volume(23, 1, 32, 32);
  BitstreamContainer c = encode_volume(v, m, 16);
  REQUIRE(c.chunks.size() == 1);
  Volume r = decode_volume(c, m);
  CHECK(r.depth == 1);
}

TEST_CASE("gop independence: later groups decode without earlier ones") {
  Model m = tiny_model();
  const int gop = 3;
  Volume v = make_textured_volume(29, 7, 32, 32);  // groups of 3,3,1
  BitstreamContainer c = encode_volume(v, m, gop);
  Volume full = decode_volume(c, m);

  BitstreamContainer suffix = c;
  suffix.chunks.erase(suffix.chunks.begin(), suffix.chunks.begin() + gop);
  suffix.depth = v.depth - gop;
  Volume tail = decode_volume(suffix, m);
  for (int z = 0; z < tail.depth; ++z)
    for (int y = 0; y < v.height; ++y)
      for (int x = 0; x < v.width; ++x)
        CHECK(tail.at(z, y, x) == full.at(z + gop, y, x));
}

TEST_CASE("two-pass decode equals position-serial reference decode") {
  Model m = tiny_model();  // 8 latent channels
  const int hw = 128;      // 8x8 latents
  Volume v = make_textured_volume(31, 2, hw, hw);
  auto slices = normalize(v);

  CodecSession enc(m, hw, hw);
  CodecSession dec(m, hw, hw);
  for (int t = 0; t < v.depth; ++t) {
    SliceChunk chunk = encode_slice(slices[t], enc);
    Tensor serial = decode_latents_serial_reference(chunk, dec);
    DecodedSlice two_pass = decode_slice(chunk, dec);
    CHECK(serial.data == two_pass.y_hat.data);  // exact symbol equality
  }
}

TEST_CASE("ablation variants keep the bitstream decodable") {
  for (int variant = 0; variant < 3; ++variant) {
    ModelConfig cfg = ModelConfig::tiny();
    if (variant == 0) cfg.use_checkerboard = false;
    if (variant == 1) cfg.use_channel_ctx = false;
    if (variant == 2) cfg.use_auxiliary = false;
    Model m = Model::init(cfg, 77);
    Volume v = make_textured_volume(37, 3, 32, 32);
    BitstreamContainer c = encode_volume(v, m, 2);
    Volume r = decode_volume(c, m);
    CHECK(r.samples.size() == v.numel());
  }
}

}  // TEST_SUITE
