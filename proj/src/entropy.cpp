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

#include "hcc/entropy.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "hcc/autograd.hpp"

namespace hcc {

// ---------------------------------------------------------------------------
// FreqTable

FreqTable::FreqTable(int symbol_lo, std::vector<std::uint32_t> freqs) : lo_(symbol_lo), freqs_(std::move(freqs)) {
  if (freqs_.empty()) throw std::invalid_argument("frequency table is empty");
  cum_.resize(freqs_.size() + 1);
  cum_[0] = 0;
  for (std::size_t i = 0; i < freqs_.size(); ++i) {
    if (freqs_[i] == 0) throw std::invalid_argument("frequency table has a zero entry");
    cum_[i + 1] = cum_[i] + freqs_[i];
  }
  if (cum_.back() != kFreqTotal) {
    throw std::invalid_argument("frequency table sums to " + std::to_string(cum_.back()) + ", expected 65536");
  }
}

std::size_t FreqTable::index(int symbol) const {
  if (!contains(symbol)) {
    throw CodecError("symbol " + std::to_string(symbol) + " outside alphabet [" + std::to_string(lo_) + ", " +
                     std::to_string(symbol_hi()) + "]");
  }
  return static_cast<std::size_t>(symbol - lo_);
}

int FreqTable::symbol_for(std::uint32_t target) const {
  auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
  return lo_ + static_cast<int>(it - cum_.begin()) - 1;
}

double FreqTable::cost_bits(int symbol) const {
  return static_cast<double>(kFreqBits) - std::log2(static_cast<double>(freq(symbol)));
}

FreqTable quantize_pmf(double mu, double b, int lo, int hi) {
  if (!(b > 0.0) || !std::isfinite(b) || !std::isfinite(mu)) throw std::domain_error("quantize_pmf: invalid (mu, b)");
  if (hi < lo) throw std::invalid_argument("quantize_pmf: empty alphabet");
  const std::size_t n = static_cast<std::size_t>(hi - lo + 1);
  if (n > kFreqTotal) throw std::invalid_argument("quantize_pmf: alphabet larger than the frequency total");

  // Box masses. Symbols strictly inside one tail form a geometric sequence
  // with ratio exp(-1/b) walking away from the mode.
  thread_local std::vector<double> mass;
  mass.assign(n, 0.0);
  const double ratio = std::exp(-1.0 / b);
  const int center = static_cast<int>(std::clamp(std::round(mu), double(lo), double(hi)));
  const std::size_t ci = static_cast<std::size_t>(center - lo);
  mass[ci] = laplace_box_mass(center, mu, b);
  if (ci + 1 < n) {
    mass[ci + 1] = laplace_box_mass(center + 1, mu, b);
    for (std::size_t i = ci + 2; i < n; ++i) mass[i] = mass[i - 1] * ratio;
  }
  if (ci > 0) {
    mass[ci - 1] = laplace_box_mass(center - 1, mu, b);
    for (std::size_t i = ci - 1; i-- > 0;) mass[i] = mass[i + 1] * ratio;
  }

  double total = 0.0;
  for (double m : mass) total += m;
  if (!(total >= 1e-300)) {
    // Mode far outside the alphabet with a tiny scale: every box mass
    // underflows, so the nearest symbol takes all of it.
    std::fill(mass.begin(), mass.end(), 0.0);
    mass[ci] = 1.0;
    total = 1.0;
  }
  const double scale = total > 0.0 ? static_cast<double>(kFreqTotal - n) / total : 0.0;
  std::vector<std::uint32_t> freqs(n);
  // (remainder, symbol index) of every entry; the largest remainders get
  // the leftover units, lower symbols first among equal remainders.
  thread_local std::vector<std::pair<double, std::uint32_t>> rem;
  rem.resize(n);
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double scaled = mass[i] * scale;
    const auto whole = static_cast<std::uint32_t>(scaled);  // floor, scaled >= 0
    const double fl = static_cast<double>(whole);
    freqs[i] = 1 + whole;
    rem[i] = {scaled - fl, static_cast<std::uint32_t>(i)};
    assigned += freqs[i];
  }
  if (assigned > kFreqTotal) throw std::logic_error("quantize_pmf: over-assigned frequencies");
  const std::size_t missing = kFreqTotal - assigned;
  if (missing > 0) {
    // Remainders lie in [0, 1). Bucketing them first leaves only the bucket
    // holding the cut to be ordered.
    constexpr std::size_t kBuckets = 256;
    auto bucket_of = [](double r) { return std::min(static_cast<std::size_t>(r * kBuckets), kBuckets - 1); };
    std::array<std::uint32_t, kBuckets> count{};
    for (const auto& e : rem) ++count[bucket_of(e.first)];
    std::size_t cut = kBuckets - 1, above = 0;
    while (cut > 0 && above + count[cut] < missing) above += count[cut--];
    thread_local std::vector<std::pair<double, std::uint32_t>> edge;
    edge.clear();
    for (const auto& e : rem) {
      const std::size_t k = bucket_of(e.first);
      if (k > cut) {
        ++freqs[e.second];
      } else if (k == cut) {
        edge.push_back(e);
      }
    }
    const std::size_t take = std::min(missing - above, edge.size());
    auto larger = [](const std::pair<double, std::uint32_t>& a, const std::pair<double, std::uint32_t>& c) {
      return a.first != c.first ? a.first > c.first : a.second < c.second;
    };
    if (take > 0) {
      std::nth_element(edge.begin(), edge.begin() + static_cast<std::ptrdiff_t>(take - 1), edge.end(), larger);
      for (std::size_t k = 0; k < take; ++k) ++freqs[edge[k].second];
    }
  }
  return FreqTable(lo, std::move(freqs));
}

// ---------------------------------------------------------------------------
// Range coder

namespace {
constexpr std::uint32_t kTop = 1u << 24;
}

void RangeEncoder::encode(const FreqTable& table, int symbol) {
  const std::uint64_t r = range_;
  const std::uint64_t c = table.cum(symbol);
  const std::uint64_t start = (r * c) >> kFreqBits;
  const std::uint64_t end = (r * (c + table.freq(symbol))) >> kFreqBits;
  low_ += start;
  range_ = static_cast<std::uint32_t>(end - start);
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const auto carry = static_cast<std::uint8_t>(low_ >> 32);
    std::uint8_t temp = cache_;
    do {
      out_.push_back(static_cast<std::uint8_t>(temp + carry));
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(static_cast<std::uint32_t>(low_) >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> payload) : in_(payload) {
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= in_.size()) throw CodecError("truncated range-coded payload");
  return in_[pos_++];
}

int RangeDecoder::decode(const FreqTable& table) {
  const std::uint64_t r = range_;
  const std::uint64_t target = ((static_cast<std::uint64_t>(code_) + 1) * kFreqTotal - 1) / r;
  if (target >= kFreqTotal) throw CodecError("corrupt range-coded payload");
  const int symbol = table.symbol_for(static_cast<std::uint32_t>(target));
  const std::uint64_t c = table.cum(symbol);
  const std::uint64_t start = (r * c) >> kFreqBits;
  const std::uint64_t end = (r * (c + table.freq(symbol))) >> kFreqBits;
  code_ -= static_cast<std::uint32_t>(start);
  range_ = static_cast<std::uint32_t>(end - start);
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
  return symbol;
}

std::vector<std::uint8_t> range_encode(std::span<const int> symbols, const TableProvider& tables) {
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) enc.encode(tables(i, symbols.first(i)), symbols[i]);
  return enc.finish();
}

std::vector<int> range_decode(std::span<const std::uint8_t> payload, std::size_t count, const TableProvider& tables) {
  RangeDecoder dec(payload);
  std::vector<int> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(dec.decode(tables(i, out)));
  return out;
}

// ---------------------------------------------------------------------------
// Bits and Exp-Golomb

void BitWriter::write_bit(bool bit) {
  if (bits_ % 8 == 0) buf_.push_back(0);
  if (bit) buf_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ % 8));
  ++bits_;
}

void BitWriter::write_bits(std::uint64_t value, unsigned count) {
  for (unsigned i = count; i-- > 0;) write_bit(((value >> i) & 1u) != 0);
}

bool BitReader::read_bit() {
  const std::uint64_t byte = bits_ / 8;
  if (byte >= data_.size()) throw CodecError("bit reader ran past the end of its buffer");
  const bool bit = ((data_[byte] >> (7 - bits_ % 8)) & 1u) != 0;
  ++bits_;
  return bit;
}

std::uint64_t BitReader::read_bits(unsigned count) {
  std::uint64_t v = 0;
  for (unsigned i = 0; i < count; ++i) v = (v << 1) | (read_bit() ? 1u : 0u);
  return v;
}

std::uint64_t zigzag_encode(std::int64_t v) {
  return v > 0 ? 2 * static_cast<std::uint64_t>(v) - 1 : 2 * static_cast<std::uint64_t>(-v);
}

std::int64_t zigzag_decode(std::uint64_t u) {
  return (u & 1u) ? static_cast<std::int64_t>((u + 1) / 2) : -static_cast<std::int64_t>(u / 2);
}

namespace {

constexpr std::int64_t kExpGolombLimit = std::int64_t{1} << 31;

void check_range(std::int64_t v) {
  if (v <= -kExpGolombLimit || v >= kExpGolombLimit) {
    throw CodecError("Exp-Golomb value " + std::to_string(v) + " exceeds 31-bit magnitude");
  }
}

}  // namespace

unsigned expgolomb_length(std::int64_t v) {
  const std::uint64_t u = zigzag_encode(v) + 1;
  return 2 * static_cast<unsigned>(std::bit_width(u) - 1) + 1;
}

void expgolomb_encode_signed(std::span<const std::int64_t> values, BitWriter& writer) {
  for (std::int64_t v : values) {
    check_range(v);
    const std::uint64_t u = zigzag_encode(v) + 1;
    const unsigned width = static_cast<unsigned>(std::bit_width(u));
    writer.write_bits(0, width - 1);
    writer.write_bits(u, width);
  }
}

std::vector<std::int64_t> expgolomb_decode_signed(BitReader& reader, std::size_t count) {
  std::vector<std::int64_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned zeros = 0;
    while (!reader.read_bit()) {
      if (++zeros > 32) throw CodecError("Exp-Golomb prefix longer than 32 bits");
    }
    const std::uint64_t u = (std::uint64_t{1} << zeros) | reader.read_bits(zeros);
    const std::int64_t v = zigzag_decode(u - 1);
    check_range(v);
    out.push_back(v);
  }
  return out;
}

}  // namespace hcc
