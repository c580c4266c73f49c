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


#include <cmath>
#include <numeric>

#include "doctest.h"
#include "entropy_suite.hpp"
#include "hcc/autograd.hpp"
#include "hcc/entropy.hpp"

using namespace hcc;

namespace {

std::string bits_of(const BitWriter& w) {
  std::string s;
  BitReader r(w.bytes());
  for (std::uint64_t i = 0; i < w.bit_position(); ++i) s.push_back(r.read_bit() ? '1' : '0');
  return s;
}

}  // namespace

TEST_CASE("quantize_pmf") {
  SUBCASE("tables always sum to the total with positive entries") {
    Rng rng(1);
    for (int i = 0; i < 300; ++i) {
      const double mu = rng.uniform(-300.0, 300.0), b = std::exp(rng.uniform(-12.0, 12.0));
      const FreqTable t = quantize_pmf(mu, b);
      CHECK(t.size() == 512);
      CHECK(std::accumulate(t.freqs().begin(), t.freqs().end(), std::uint64_t{0}) == kFreqTotal);
      for (auto f : t.freqs()) CHECK(f >= 1);
    }
  }
  SUBCASE("very wide laplace is nearly uniform") {
    const FreqTable t = quantize_pmf(0.0, 1e9);
    for (auto f : t.freqs()) {
      CHECK(f >= 127);
      CHECK(f <= 129);
    }
  }
  SUBCASE("unit scale peak") {
    // Every symbol keeps at least one unit, so the 512-symbol table can sit
    // below the exact mass by up to the reserved floor units.
    const FreqTable t = quantize_pmf(0.0, 1.0);
    const double p0 = 1.0 - std::exp(-0.5);
    CHECK(std::abs(t.freq(0) / 65536.0 - p0) <= 512.0 / 65536.0 + std::ldexp(1.0, -12));
    CHECK(std::abs(t.freq(0) / 65536.0 - p0 * (65536.0 - 512.0) / 65536.0) <= std::ldexp(1.0, -12));
    const FreqTable small = quantize_pmf(0.0, 1.0, -8, 8);
    CHECK(std::abs(small.freq(0) / 65536.0 - p0) <= std::ldexp(1.0, -12));
  }
  SUBCASE("deterministic, ties go to the lower symbol") {
    const auto a = quantize_pmf(1.7, 0.8), b = quantize_pmf(1.7, 0.8);
    CHECK(std::equal(a.freqs().begin(), a.freqs().end(), b.freqs().begin()));
    // Symbols 1 and 2 have identical masses around mu = 1.5.
    int differing = 0;
    for (int k = 1; k <= 400; ++k) {
      const FreqTable t = quantize_pmf(1.5, 0.05 * k, 0, 2);
      CHECK(t.freq(1) >= t.freq(2));
      CHECK(t.freq(1) <= t.freq(2) + 1);
      if (t.freq(1) != t.freq(2)) ++differing;
    }
    CHECK(differing > 0);
  }
  SUBCASE("invalid scale") { CHECK_THROWS(quantize_pmf(0.0, 0.0)); }
}

TEST_CASE("range coder") {
  const FreqTable half(0, {32768, 32768});
  auto fixed = [](const FreqTable& t) { return [t](std::size_t, std::span<const int>) { return t; }; };
  SUBCASE("empty input") {
    auto bytes = range_encode({}, fixed(half));
    CHECK(bytes.size() <= 6);
    CHECK(range_decode(bytes, 0, fixed(half)).empty());
  }
  SUBCASE("one binary event") {
    std::vector<int> one = {1};
    auto bytes = range_encode(one, fixed(half));
    // one bit of information plus the 5-byte flush
    CHECK(bytes.size() * 8 <= 1 + 40);
    CHECK(range_decode(bytes, 1, fixed(half)) == one);
  }
  SUBCASE("long sequence from known tables") {
    Rng rng(3);
    std::vector<FreqTable> tables;
    for (int i = 0; i < 16; ++i) tables.push_back(quantize_pmf(rng.uniform(-5, 5), std::exp(rng.uniform(-2, 3))));
    std::vector<int> symbols(100000);
    double estimate = 0.0;
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      const FreqTable& t = tables[i % 16];
      // inverse-cdf sampling from the table itself
      symbols[i] = t.symbol_for(static_cast<std::uint32_t>(rng.index(kFreqTotal)));
      estimate += t.cost_bits(symbols[i]);
    }
    auto provider = [&](std::size_t i, std::span<const int>) { return tables[i % 16]; };
    auto bytes = range_encode(symbols, provider);
    CHECK(range_decode(bytes, symbols.size(), provider) == symbols);
    const double measured = 8.0 * static_cast<double>(bytes.size());
    CHECK(measured >= estimate);
    CHECK(measured <= estimate * 1.001 + 64.0);
  }
  SUBCASE("adaptive tables depend on the decoded prefix") {
    // The table for symbol i is centered on symbol i - 1.
    auto provider = [](std::size_t, std::span<const int> prefix) {
      return quantize_pmf(prefix.empty() ? 0.0 : prefix.back(), 1.5);
    };
    std::vector<int> symbols;
    Rng rng(4);
    int cur = 0;
    for (int i = 0; i < 2000; ++i) {
      cur = std::clamp(cur + static_cast<int>(rng.index(5)) - 2, -256, 255);
      symbols.push_back(cur);
    }
    auto bytes = range_encode(symbols, provider);
    CHECK(range_decode(bytes, symbols.size(), provider) == symbols);
  }
  SUBCASE("errors") {
    std::vector<int> bad = {5};
    CHECK_THROWS_AS(range_encode(bad, fixed(half)), CodecError);
    std::vector<int> many(200, 1);
    auto bytes = range_encode(many, fixed(half));
    bytes.resize(bytes.size() / 2);
    CHECK_THROWS_AS(range_decode(bytes, many.size(), fixed(half)), CodecError);
  }
}

TEST_CASE("ARM-adaptive latent coding") {
  const auto s = hcc::testing::range_coder_round_trips(40);
  CHECK(s.mismatches == 0);
  const auto f = hcc::testing::rate_fidelity(20);
  CHECK(f.violations == 0);
}

TEST_CASE("exp-golomb") {
  SUBCASE("code words") {
    auto code = [](std::int64_t v) {
      BitWriter w;
      std::vector<std::int64_t> one = {v};
      expgolomb_encode_signed(one, w);
      return bits_of(w);
    };
    CHECK(code(0) == "1");
    CHECK(code(1) == "010");
    CHECK(code(-1) == "011");
    CHECK(code(2) == "00100");
    CHECK(code(-2) == "00101");
  }
  SUBCASE("zigzag and lengths") {
    CHECK(zigzag_encode(0) == 0);
    CHECK(zigzag_encode(1) == 1);
    CHECK(zigzag_encode(-1) == 2);
    CHECK(zigzag_encode(2) == 3);
    CHECK(zigzag_encode(-2) == 4);
    for (std::int64_t v = -50; v <= 50; ++v) CHECK(zigzag_decode(zigzag_encode(v)) == v);
    const unsigned expected[] = {1, 3, 3, 5, 5, 5, 5};
    for (std::uint64_t u = 0; u < 7; ++u) CHECK(expgolomb_length(zigzag_decode(u)) == expected[u]);
  }
  SUBCASE("random values round trip at the closed-form length") {
    const auto s = hcc::testing::expgolomb_round_trips(20);
    CHECK(s.mismatches == 0);
  }
  SUBCASE("extremes") {
    std::vector<std::int64_t> v = {2147483647, -2147483647, 0};
    BitWriter w;
    expgolomb_encode_signed(v, w);
    BitReader r(w.bytes());
    CHECK(expgolomb_decode_signed(r, 3) == v);
    std::vector<std::int64_t> big = {std::int64_t{1} << 31};
    CHECK_THROWS_AS(expgolomb_encode_signed(big, w), CodecError);
  }
  SUBCASE("bit writer and reader") {
    BitWriter w;
    w.write_bits(0b1011, 4);
    w.write_bits(0x3FF, 10);
    CHECK(w.bit_position() == 14);
    CHECK(w.bytes().size() == 2);
    BitReader r(w.bytes());
    CHECK(r.read_bits(4) == 0b1011);
    CHECK(r.read_bits(10) == 0x3FF);
    CHECK(r.read_bits(2) == 0);
    CHECK_THROWS_AS(r.read_bit(), CodecError);
  }
}
