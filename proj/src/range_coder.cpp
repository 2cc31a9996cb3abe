#include "vvmc/range_coder.hpp"

#include <algorithm>
#include <cmath>

namespace vvmc {

namespace {
constexpr std::uint32_t kTop = 1u << 24;
}

CdfTable CdfTable::from_probabilities(const std::vector<double>& p, int tail) {
  CdfTable t;
  t.tail = tail;
  const int n = t.alphabet();
  if (static_cast<int>(p.size()) != n)
    throw std::invalid_argument("CdfTable: probability count mismatch");

  std::vector<std::int64_t> f(n);
  std::int64_t total = 0;
  for (int i = 0; i < n; ++i) {
    std::int64_t v = std::llround(p[i] * static_cast<double>(kCdfTotal));
    f[i] = std::max<std::int64_t>(1, v);
    total += f[i];
  }
  // Deterministic rebalance toward the dominant slot.
  while (total != kCdfTotal) {
    int arg = 0;
    for (int i = 1; i < n; ++i)
      if (f[i] > f[arg]) arg = i;
    if (total > static_cast<std::int64_t>(kCdfTotal)) {
      std::int64_t take =
          std::min(total - kCdfTotal, f[arg] - 1);
      if (take <= 0)
        throw std::logic_error("CdfTable: cannot rebalance");
      f[arg] -= take;
      total -= take;
    } else {
      f[arg] += kCdfTotal - total;
      total = kCdfTotal;
    }
  }
  t.cum.resize(n + 1);
  t.cum[0] = 0;
  for (int i = 0; i < n; ++i)
    t.cum[i + 1] = t.cum[i] + static_cast<std::uint32_t>(f[i]);
  return t;
}

// ---------------------------------------------------------------------------

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t temp = cache_;
    do {
      bytes_.push_back(static_cast<std::uint8_t>(temp + carry));
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ << 8) & 0xFFFFFFFFull;
}

void RangeEncoder::encode(std::uint32_t cum_lo, std::uint32_t freq) {
  std::uint32_t r = range_ >> 16;  // total is always 2^16
  low_ += static_cast<std::uint64_t>(cum_lo) * r;
  range_ = r * freq;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode_symbol(const CdfTable& t, int symbol) {
  if (symbol >= -t.tail && symbol <= t.tail) {
    int i = t.index_of(symbol);
    encode(t.cum[i], t.freq(i));
  } else {
    int e = t.escape_index();
    encode(t.cum[e], t.freq(e));
    encode_raw16(static_cast<std::uint16_t>(symbol + 32768));
  }
}

void RangeEncoder::encode_raw16(std::uint16_t v) { encode(v, 1); }

std::vector<std::uint8_t> RangeEncoder::finish() {
  if (!finished_) {
    for (int i = 0; i < 5; ++i) shift_low();
    finished_ = true;
  }
  return bytes_;
}

// ---------------------------------------------------------------------------

RangeDecoder::RangeDecoder(const std::vector<std::uint8_t>& bytes)
    : bytes_(bytes) {
  next_byte();  // skip the encoder's initial cache byte
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= bytes_.size()) throw DecodeError("range decoder: truncated stream");
  return bytes_[pos_++];
}

void RangeDecoder::normalize() {
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

int RangeDecoder::decode_symbol(const CdfTable& t) {
  std::uint32_t r = range_ >> 16;
  std::uint32_t f = code_ / r;
  if (f > kCdfTotal - 1) f = kCdfTotal - 1;
  // largest index with cum[index] <= f
  int idx = static_cast<int>(std::upper_bound(t.cum.begin(), t.cum.end(), f) -
                             t.cum.begin()) - 1;
  code_ -= t.cum[idx] * r;
  range_ = r * t.freq(idx);
  normalize();
  if (idx == t.escape_index())
    return static_cast<int>(decode_raw16()) - 32768;
  return t.symbol_of(idx);
}

std::uint16_t RangeDecoder::decode_raw16() {
  std::uint32_t r = range_ >> 16;
  std::uint32_t f = code_ / r;
  if (f > kCdfTotal - 1) f = kCdfTotal - 1;
  code_ -= f * r;
  range_ = r;
  normalize();
  return static_cast<std::uint16_t>(f);
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> rc_encode(const std::vector<int>& symbols,
                                    const std::vector<const CdfTable*>& tables) {
  if (symbols.size() != tables.size())
    throw std::invalid_argument("rc_encode: one table per symbol required");
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i)
    enc.encode_symbol(*tables[i], symbols[i]);
  return enc.finish();
}

std::vector<int> rc_decode(const std::vector<std::uint8_t>& bytes,
                           const std::vector<const CdfTable*>& tables) {
  RangeDecoder dec(bytes);
  std::vector<int> out(tables.size());
  for (std::size_t i = 0; i < tables.size(); ++i)
    out[i] = dec.decode_symbol(*tables[i]);
  return out;
}

}  // namespace vvmc
