// Copyright 2026 The hcc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace hcc {

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr unsigned kFreqBits = 16;
inline constexpr std::uint32_t kFreqTotal = 1u << kFreqBits;

/// Static symbol distribution over [symbol_lo, symbol_lo + size) whose
/// frequencies sum to exactly 2^16, every symbol at least 1.
class FreqTable {
 public:
  FreqTable(int symbol_lo, std::vector<std::uint32_t> freqs);

  int symbol_lo() const { return lo_; }
  int symbol_hi() const { return lo_ + static_cast<int>(freqs_.size()) - 1; }
  std::size_t size() const { return freqs_.size(); }
  bool contains(int symbol) const { return symbol >= lo_ && symbol <= symbol_hi(); }

  std::uint32_t freq(int symbol) const { return freqs_[index(symbol)]; }
  std::uint32_t cum(int symbol) const { return cum_[index(symbol)]; }
  std::span<const std::uint32_t> freqs() const { return freqs_; }
  /// Symbol whose cumulative interval contains target in [0, 2^16).
  int symbol_for(std::uint32_t target) const;
  /// -log2(freq / 2^16).
  double cost_bits(int symbol) const;

 private:
  std::size_t index(int symbol) const;

  int lo_;
  std::vector<std::uint32_t> freqs_;
  std::vector<std::uint32_t> cum_;  // size() + 1 entries
};

/// Laplace(mu, b) box masses on [lo, hi], floored at 1 and renormalized to
/// 2^16 by largest remainder (ties to the lower symbol).
FreqTable quantize_pmf(double mu, double b, int lo = -256, int hi = 255);

/// Carry-propagating range coder: 32-bit range, byte-wise renormalization,
/// 16-bit frequency totals.
class RangeEncoder {
 public:
  void encode(const FreqTable& table, int symbol);
  /// Flushes and returns the payload; the encoder is spent afterwards.
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> payload);
  int decode(const FreqTable& table);
  std::size_t consumed() const { return pos_; }

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

/// Table for symbol `index` given the symbols before it.
using TableProvider = std::function<FreqTable(std::size_t index, std::span<const int> prefix)>;

std::vector<std::uint8_t> range_encode(std::span<const int> symbols, const TableProvider& tables);
std::vector<int> range_decode(std::span<const std::uint8_t> payload, std::size_t count, const TableProvider& tables);

// ---------------------------------------------------------------------------
// Bit-level I/O, most significant bit first.

class BitWriter {
 public:
  void write_bit(bool bit);
  void write_bits(std::uint64_t value, unsigned count);
  std::uint64_t bit_position() const { return bits_; }
  /// Buffer padded with zero bits to a byte boundary.
  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::uint64_t bits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> data) : data_(data) {}
  bool read_bit();
  std::uint64_t read_bits(unsigned count);
  std::uint64_t bit_position() const { return bits_; }

 private:
  std::span<const std::uint8_t> data_;
  std::uint64_t bits_ = 0;
};

/// 0 -> 0, 1 -> 1, -1 -> 2, 2 -> 3, -2 -> 4, ...
std::uint64_t zigzag_encode(std::int64_t v);
std::int64_t zigzag_decode(std::uint64_t u);
/// Length in bits of the signed order-0 Exp-Golomb code of v.
unsigned expgolomb_length(std::int64_t v);

void expgolomb_encode_signed(std::span<const std::int64_t> values, BitWriter& writer);
std::vector<std::int64_t> expgolomb_decode_signed(BitReader& reader, std::size_t count);

}  // namespace hcc
