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

#include "hcc/bitstream.hpp"

#include <cmath>
#include <string>

namespace hcc {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'H', 'C', 'C', '1'};

void validate_header(const Header& h) {
  const auto mode = static_cast<std::uint8_t>(h.mode);
  if (mode > 2) throw CodecError("unknown stream mode " + std::to_string(mode));
  if (h.mode == StreamMode::kNonOverfitted && h.component_flags != 0) {
    throw CodecError("mode 0 stream must not carry parameter sections");
  }
  if (h.mode == StreamMode::kOverfitted && h.component_flags != kAllComponentsMask) {
    throw CodecError("mode 2 stream must carry all decoder components");
  }
  if ((h.component_flags & ~kAllComponentsMask) != 0) throw CodecError("unknown component flag bits");
  if (h.width == 0 || h.height == 0) throw CodecError("image dimensions must be positive");
  if (h.num_grids == 0 || h.num_grids > kMaxGrids) throw CodecError("invalid number of latent grids");
}

}  // namespace

Bytes write_bitstream(const Bitstream& s) {
  validate_header(s.header);
  if (s.sections.size() > 255) throw CodecError("too many parameter sections");
  ByteWriter w;
  w.raw(kMagic);
  w.u8(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(s.header.mode));
  w.u16(s.header.width);
  w.u16(s.header.height);
  w.u8(s.header.num_grids);
  w.raw(s.header.base_model_id);
  w.u8(s.header.component_flags);
  w.u8(static_cast<std::uint8_t>(s.sections.size()));
  for (const auto& sec : s.sections) {
    if (sec.quant_step_index >= kNumStepIndices) throw CodecError("quantization step index out of range");
    w.u8(sec.component_id);
    w.u8(sec.quant_step_index);
    w.u32(sec.count);
    w.u32(static_cast<std::uint32_t>(sec.payload.size()));
    w.raw(sec.payload);
  }
  w.u32(static_cast<std::uint32_t>(s.latent_payload.size()));
  w.raw(s.latent_payload);
  return w.take();
}

Bitstream read_bitstream(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw CodecError("bad magic");
  }
  r.raw(4);
  const std::uint8_t version = r.u8();
  if (version != kFormatVersion) throw CodecError("unsupported bitstream version " + std::to_string(version));

  Bitstream s;
  const std::uint8_t mode = r.u8();
  if (mode > 2) throw CodecError("unknown stream mode " + std::to_string(mode));
  s.header.mode = static_cast<StreamMode>(mode);
  s.header.width = r.u16();
  s.header.height = r.u16();
  s.header.num_grids = r.u8();
  auto id = r.raw(8);
  std::copy(id.begin(), id.end(), s.header.base_model_id.begin());
  s.header.component_flags = r.u8();
  validate_header(s.header);
  const std::uint8_t count = r.u8();

  ComponentMask seen = 0;
  for (std::uint8_t i = 0; i < count; ++i) {
    ParamSection sec;
    sec.component_id = r.u8();
    sec.quant_step_index = r.u8();
    if (sec.quant_step_index >= kNumStepIndices) throw CodecError("quantization step index out of range");
    sec.count = r.u32();
    const std::uint32_t len = r.u32();
    auto payload = r.raw(len);
    sec.payload.assign(payload.begin(), payload.end());
    if (sec.component_id < kNumComponents) {
      const auto m = mask_of(static_cast<Component>(sec.component_id));
      if (seen & m) throw CodecError("duplicate parameter section");
      seen |= m;
    }
    s.sections.push_back(std::move(sec));
  }
  if (seen != s.header.component_flags) throw CodecError("parameter sections do not match component flags");
  const std::uint32_t latent_len = r.u32();
  auto latent = r.raw(latent_len);
  s.latent_payload.assign(latent.begin(), latent.end());
  if (r.remaining() != 0) throw CodecError("trailing bytes after latent payload");
  return s;
}

double quant_step(std::uint8_t index) {
  if (index >= kNumStepIndices) throw CodecError("quantization step index out of range");
  return std::ldexp(1.0, -static_cast<int>(index));
}

std::vector<std::int64_t> quantize_param_tensor(std::span<const double> values, double step) {
  std::vector<std::int64_t> q;
  q.reserve(values.size());
  for (double v : values) {
    const double r = std::round(v / step);
    if (!(std::abs(r) < 2147483648.0)) throw CodecError("parameter too large for its quantization step");
    q.push_back(static_cast<std::int64_t>(r));
  }
  return q;
}

std::vector<double> dequantize_param_tensor(std::span<const std::int64_t> q, double step) {
  std::vector<double> out;
  out.reserve(q.size());
  for (auto v : q) out.push_back(static_cast<double>(v) * step);
  return out;
}

SectionCoding encode_param_section(Component c, std::uint8_t step_index, std::span<const double> values) {
  const auto q = quantize_param_tensor(values, quant_step(step_index));
  BitWriter bw;
  expgolomb_encode_signed(q, bw);
  SectionCoding out;
  out.section.component_id = static_cast<std::uint8_t>(c);
  out.section.quant_step_index = step_index;
  out.section.count = static_cast<std::uint32_t>(values.size());
  out.section.payload = bw.bytes();
  out.bits = kSectionHeaderBytes * 8 + bw.bit_position();
  return out;
}

std::vector<double> decode_param_section(const ParamSection& section) {
  BitReader br(section.payload);
  const auto q = expgolomb_decode_signed(br, section.count);
  if ((br.bit_position() + 7) / 8 != section.payload.size()) {
    throw CodecError("parameter section length does not match its declared count");
  }
  return dequantize_param_tensor(q, quant_step(section.quant_step_index));
}

ModulationCoding serialize_modulation(const Modulation& delta) {
  ModulationCoding out;
  for (Component c : kAllComponents) {
    if (!delta.has(c)) continue;
    auto coded = encode_param_section(c, delta.step_index[index_of(c)], delta[c]);
    out.bits += coded.bits;
    out.sections.push_back(std::move(coded.section));
  }
  return out;
}

Modulation deserialize_modulation(std::span<const ParamSection> sections, const Architecture& arch) {
  Modulation m;
  for (const auto& sec : sections) {
    if (sec.component_id >= kNumComponents) continue;
    const auto c = static_cast<Component>(sec.component_id);
    if (sec.count != component_size(c, arch)) {
      throw CodecError("section for " + std::string(component_name(c)) + " declares " + std::to_string(sec.count) +
                       " values, architecture has " + std::to_string(component_size(c, arch)));
    }
    m.deltas[index_of(c)] = decode_param_section(sec);
    m.step_index[index_of(c)] = sec.quant_step_index;
  }
  return m;
}

std::vector<ParamSection> serialize_params(const DecoderParams& params, const std::array<std::uint8_t, 3>& steps) {
  std::vector<ParamSection> out;
  for (Component c : kAllComponents) {
    out.push_back(encode_param_section(c, steps[index_of(c)], flatten(params[c])).section);
  }
  return out;
}

DecoderParams deserialize_params(std::span<const ParamSection> sections, const Architecture& arch) {
  DecoderParams p;
  Modulation m = deserialize_modulation(sections, arch);
  for (Component c : kAllComponents) {
    if (!m.has(c)) throw CodecError("missing parameter section for " + std::string(component_name(c)));
    const auto shapes = component_shapes(c, arch);
    p[c] = unflatten(m[c], shapes);
  }
  return p;
}

DecoderParams quantize_params(const DecoderParams& params, const std::array<std::uint8_t, 3>& steps) {
  DecoderParams out = params;
  for (Component c : kAllComponents) {
    const double step = quant_step(steps[index_of(c)]);
    for (auto& t : out[c]) {
      const auto q = quantize_param_tensor(t.data(), step);
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(q[i]) * step;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Latents

namespace {

int symbol_of(double v) {
  const double r = std::round(v);
  if (r != v || r < kLatentMin || r > kLatentMax) {
    throw CodecError("latent value " + std::to_string(v) + " is not an integer in [-256, 255]");
  }
  return static_cast<int>(r);
}

FreqTable table_at(const Tensor& grid, std::size_t y, std::size_t x, std::span<const Tensor> arm) {
  const auto ctx = context_at(grid, y, x);
  const auto p = arm_predict(ctx, arm);
  return quantize_pmf(p.mu, p.b, kLatentMin, kLatentMax);
}

}  // namespace

Bytes encode_latents(const LatentGrids& latents, std::span<const Tensor> arm) {
  check_schedule(latents);
  RangeEncoder enc;
  for (std::size_t gi = latents.num_grids(); gi-- > 0;) {
    const Tensor& grid = latents.grids[gi];
    for (std::size_t y = 0; y < grid.dim(0); ++y) {
      for (std::size_t x = 0; x < grid.dim(1); ++x) {
        enc.encode(table_at(grid, y, x, arm), symbol_of(grid[y * grid.dim(1) + x]));
      }
    }
  }
  return enc.finish();
}

LatentGrids decode_latents(std::span<const std::uint8_t> payload, std::size_t height, std::size_t width,
                           std::size_t num_grids, std::span<const Tensor> arm) {
  LatentGrids latents = init_latents(height, width, num_grids);
  RangeDecoder dec(payload);
  for (std::size_t gi = latents.num_grids(); gi-- > 0;) {
    Tensor& grid = latents.grids[gi];
    for (std::size_t y = 0; y < grid.dim(0); ++y) {
      for (std::size_t x = 0; x < grid.dim(1); ++x) {
        grid[y * grid.dim(1) + x] = dec.decode(table_at(grid, y, x, arm));
      }
    }
  }
  if (dec.consumed() != payload.size()) throw CodecError("latent payload has trailing bytes");
  return latents;
}

double latent_table_bits(const LatentGrids& latents, std::span<const Tensor> arm) {
  double bits = 0.0;
  for (std::size_t gi = latents.num_grids(); gi-- > 0;) {
    const Tensor& grid = latents.grids[gi];
    for (std::size_t y = 0; y < grid.dim(0); ++y) {
      for (std::size_t x = 0; x < grid.dim(1); ++x) {
        bits += table_at(grid, y, x, arm).cost_bits(symbol_of(grid[y * grid.dim(1) + x]));
      }
    }
  }
  return bits;
}

}  // namespace hcc
