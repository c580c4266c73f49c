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

// .hcc container layout (all integers big-endian):
//
//   header (21 bytes)
//     magic "HCC1" | version u8 | mode u8 | width u16 | height u16 |
//     num_grids u8 | base_model_id 8 bytes | component_flags u8 |
//     section_count u8
//   section_count x parameter section
//     component_id u8 | quant_step_index u8 | count u32 | payload_bytes u32 |
//     payload (signed Exp-Golomb values, zero-padded to a byte)
//   latent section
//     payload_bytes u32 | range-coded payload
//
// Mode 0 streams reference an out-of-band base decoder and carry no
// parameter sections; mode 1 streams carry additive modulations of that base
// decoder; mode 2 streams carry a complete decoder.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hcc/bytes.hpp"
#include "hcc/codec_model.hpp"
#include "hcc/entropy.hpp"

namespace hcc {

enum class StreamMode : std::uint8_t { kNonOverfitted = 0, kHyper = 1, kOverfitted = 2 };

inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 21;
inline constexpr std::size_t kSectionHeaderBytes = 10;
inline constexpr std::uint8_t kNumStepIndices = 16;

struct Header {
  StreamMode mode = StreamMode::kNonOverfitted;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint8_t num_grids = 0;
  ModelId base_model_id{};
  ComponentMask component_flags = 0;
  bool operator==(const Header&) const = default;
};

struct ParamSection {
  std::uint8_t component_id = 0;
  std::uint8_t quant_step_index = 0;
  std::uint32_t count = 0;
  Bytes payload;
  bool operator==(const ParamSection&) const = default;
};

struct Bitstream {
  Header header;
  std::vector<ParamSection> sections;
  Bytes latent_payload;
  bool operator==(const Bitstream&) const = default;
};

Bytes write_bitstream(const Bitstream& stream);
/// Checks magic and version before anything else; throws CodecError.
Bitstream read_bitstream(std::span<const std::uint8_t> bytes);

double quant_step(std::uint8_t index);
/// round(v / step), half away from zero.
std::vector<std::int64_t> quantize_param_tensor(std::span<const double> values, double step);
std::vector<double> dequantize_param_tensor(std::span<const std::int64_t> q, double step);

struct SectionCoding {
  ParamSection section;
  /// Section header bits plus the exact Exp-Golomb bit count, before padding.
  std::uint64_t bits = 0;
};

SectionCoding encode_param_section(Component c, std::uint8_t step_index, std::span<const double> values);
/// Dequantized values of a section.
std::vector<double> decode_param_section(const ParamSection& section);

/// Sections for every present component of `delta`, quantized with the
/// per-component step indices of `delta.step_index`.
struct ModulationCoding {
  std::vector<ParamSection> sections;
  std::uint64_t bits = 0;
};
ModulationCoding serialize_modulation(const Modulation& delta);
/// Rebuilds a (quantized) modulation from stream sections; unknown component
/// ids are skipped.
Modulation deserialize_modulation(std::span<const ParamSection> sections, const Architecture& arch);

/// Sections holding every component of a decoder, one step index each.
std::vector<ParamSection> serialize_params(const DecoderParams& params, const std::array<std::uint8_t, 3>& steps);
DecoderParams deserialize_params(std::span<const ParamSection> sections, const Architecture& arch);
/// Parameters after a quantize/dequantize round trip at the given steps.
DecoderParams quantize_params(const DecoderParams& params, const std::array<std::uint8_t, 3>& steps);

// ---------------------------------------------------------------------------
// Latent payload: grids coarsest first, raster order within a grid, each
// symbol coded with the table quantize_pmf builds from the ARM prediction at
// that position.

Bytes encode_latents(const LatentGrids& latents, std::span<const Tensor> arm);
LatentGrids decode_latents(std::span<const std::uint8_t> payload, std::size_t height, std::size_t width,
                           std::size_t num_grids, std::span<const Tensor> arm);
/// Sum of -log2(freq / 2^16) over all symbols under the coding tables.
double latent_table_bits(const LatentGrids& latents, std::span<const Tensor> arm);

}  // namespace hcc
