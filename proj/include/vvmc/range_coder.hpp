#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

namespace vvmc {

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 16-bit quantized CDF over integer symbols [-tail, +tail] plus a trailing
// escape slot. cum has alphabet()+1 entries, cum[0] = 0, cum.back() = 2^16,
// strictly increasing (every slot keeps frequency >= 1).
struct CdfTable {
  int tail = 0;
  std::vector<std::uint32_t> cum;

  int alphabet() const { return 2 * tail + 2; }
  int escape_index() const { return 2 * tail + 1; }
  int index_of(int symbol) const { return symbol + tail; }
  int symbol_of(int index) const { return index - tail; }
  std::uint32_t freq(int index) const { return cum[index + 1] - cum[index]; }

  // probabilities indexed like cum (escape last); scaled deterministically
  // so that the total is exactly 2^16 and every slot stays >= 1.
  static CdfTable from_probabilities(const std::vector<double>& p, int tail);
};

constexpr std::uint32_t kCdfTotal = 1u << 16;
constexpr int kDefaultTail = 64;

// Carry-counting 32-bit renormalizing range coder (LZMA lineage). The byte
// stream starts with one padding byte the decoder skips and ends with a
// 5-byte flush.
class RangeEncoder {
 public:
  void encode(std::uint32_t cum_lo, std::uint32_t freq);
  // symbols outside [-tail, tail] cost an escape plus 16 raw bits
  void encode_symbol(const CdfTable& t, int symbol);
  void encode_raw16(std::uint16_t v);
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();
  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> bytes_;
  bool finished_ = false;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(const std::vector<std::uint8_t>& bytes);
  int decode_symbol(const CdfTable& t);
  std::uint16_t decode_raw16();

 private:
  std::uint8_t next_byte();
  void normalize();
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

// Whole-sequence helpers; one table per symbol.
std::vector<std::uint8_t> rc_encode(const std::vector<int>& symbols,
                                    const std::vector<const CdfTable*>& tables);
std::vector<int> rc_decode(const std::vector<std::uint8_t>& bytes,
                           const std::vector<const CdfTable*>& tables);

}  // namespace vvmc
