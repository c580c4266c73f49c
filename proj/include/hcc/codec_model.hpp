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

// The decoder side of the codec: hierarchical latent grids, the shared
// upsampling kernel, the synthesis network and the autoregressive entropy
// model (ARM). Every network entry point exists twice: on graph variables for
// optimization and on plain tensors for inference. Both run the same kernels,
// so their outputs are bit-identical.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "hcc/autograd.hpp"
#include "hcc/tensor.hpp"

namespace hcc {

enum class Component : std::uint8_t { kUps = 0, kSyn = 1, kArm = 2 };
inline constexpr std::array<Component, 3> kAllComponents = {Component::kUps, Component::kSyn, Component::kArm};
inline constexpr std::size_t kNumComponents = 3;

std::string_view component_name(Component c);
std::optional<Component> parse_component(std::string_view name);
inline std::size_t index_of(Component c) { return static_cast<std::size_t>(c); }

/// Bitfield over components: bit0 ups, bit1 syn, bit2 arm.
using ComponentMask = std::uint8_t;
inline constexpr ComponentMask kAllComponentsMask = 0b111;
inline constexpr ComponentMask mask_of(Component c) { return static_cast<ComponentMask>(1u << static_cast<unsigned>(c)); }
inline constexpr bool has_component(ComponentMask m, Component c) { return (m & mask_of(c)) != 0; }
/// Parses "ups,syn,arm"-style lists; throws std::invalid_argument on unknown names.
ComponentMask parse_component_list(std::string_view list);

inline constexpr std::size_t kSynHidden = 16;
inline constexpr std::size_t kArmHidden = 16;
inline constexpr std::size_t kImageChannels = 3;
inline constexpr int kLatentMin = -256;
inline constexpr int kLatentMax = 255;
inline constexpr std::size_t kMaxGrids = 8;
/// Distortion is measured in 8-bit pixel units: D = 255^2 * MSE on [0,1].
inline constexpr double kDistortionScale = 255.0 * 255.0;
inline constexpr double kArmScaleFloor = 1e-6;

struct Architecture {
  std::size_t num_grids = 7;
  bool operator==(const Architecture&) const = default;
};

/// Parameter shapes of one component, in canonical order:
///   ups: kernel [1,1,4,4]
///   syn: w1 [16,N,1,1], b1 [16], w2 [16,16,1,1], b2 [16], w3 [3,16,3,3], b3 [3]
///   arm: w1 [16,8], b1 [16], w2 [16,16], b2 [16], w3 [2,16], b3 [2]
/// Each tensor is flattened row-major; components concatenate in this order.
std::vector<Shape> component_shapes(Component c, const Architecture& arch);
std::size_t component_size(Component c, const Architecture& arch);

std::vector<double> flatten(std::span<const Tensor> tensors);
std::vector<Tensor> unflatten(std::span<const double> values, std::span<const Shape> shapes);

/// Bilinear 2x interpolation kernel, outer product of [1/4, 3/4, 3/4, 1/4].
Tensor bilinear_kernel();

struct DecoderParams {
  std::array<std::vector<Tensor>, kNumComponents> components;

  std::vector<Tensor>& operator[](Component c) { return components[index_of(c)]; }
  const std::vector<Tensor>& operator[](Component c) const { return components[index_of(c)]; }

  /// Number of latent grids the synthesis input layer expects.
  std::size_t num_grids() const;

  /// All-zero parameters with the architecture's shapes.
  static DecoderParams zeros(const Architecture& arch);
  /// Default initialization: bilinear upsampling, uniform fan-in scaled
  /// weights, zero biases except a mid-gray synthesis output bias.
  static DecoderParams initialize(const Architecture& arch, Rng& rng);

  bool operator==(const DecoderParams&) const = default;
};

/// Additive, parameter-shaped deltas for some decoder components, each in
/// canonical flattened order.
struct Modulation {
  std::array<std::optional<std::vector<double>>, kNumComponents> deltas;
  /// Quantization step index per component, step = 2^-index.
  std::array<std::uint8_t, kNumComponents> step_index{};

  bool has(Component c) const { return deltas[index_of(c)].has_value(); }
  const std::vector<double>& operator[](Component c) const { return *deltas[index_of(c)]; }
  std::vector<double>& operator[](Component c) { return *deltas[index_of(c)]; }
  ComponentMask present() const;
  bool operator==(const Modulation&) const = default;
};

/// w + delta on present components; absent components are copied.
DecoderParams apply_modulations(const DecoderParams& base, const Modulation& delta);

/// Dyadic grid schedule: grid i is ceil(H / 2^i) x ceil(W / 2^i).
std::vector<std::pair<std::size_t, std::size_t>> grid_shapes(std::size_t height, std::size_t width,
                                                             std::size_t num_grids);

struct LatentGrids {
  std::vector<Tensor> grids;  // each [h_i, w_i]

  std::size_t height() const { return grids.at(0).dim(0); }
  std::size_t width() const { return grids.at(0).dim(1); }
  std::size_t num_grids() const { return grids.size(); }
  std::size_t num_symbols() const;
  bool operator==(const LatentGrids&) const = default;
};

LatentGrids init_latents(std::size_t height, std::size_t width, std::size_t num_grids);
/// Rounds half away from zero and clamps to the latent alphabet.
LatentGrids quantize_latents(const LatentGrids& latents);
/// Throws if the grids do not follow the dyadic schedule of grid 0.
void check_schedule(const LatentGrids& latents);

struct ArmOutput {
  Tensor mu;
  Tensor b;
};

struct ArmPrediction {
  double mu;
  double b;
};

// ---------------------------------------------------------------------------
// Graph entry points.

using ComponentVars = std::vector<Var>;

struct DecoderVars {
  std::array<ComponentVars, kNumComponents> components;
  const ComponentVars& operator[](Component c) const { return components[index_of(c)]; }
  ComponentVars& operator[](Component c) { return components[index_of(c)]; }
};

DecoderVars bind_params(Graph& g, const DecoderParams& params, bool requires_grad);
std::vector<Var> bind_latents(Graph& g, const LatentGrids& latents, bool requires_grad);

Var upsample_all(std::span<const Var> grids, Var ups_kernel, std::size_t height, std::size_t width);
Var synthesize(Var features, std::span<const Var> syn);
std::pair<Var, Var> arm_forward(Var grid, std::span<const Var> arm);
/// Sum over grids and positions of -log2 P(symbol | context).
Var latent_rate_bits(std::span<const Var> grids, std::span<const Var> arm);
Var decode_image(std::span<const Var> grids, const DecoderVars& params);

struct RdTerms {
  Var loss;
  Var rate_bits;
  Var mse;
};

/// rate_bits / (H*W) + lambda * 255^2 * MSE(x, decode).
RdTerms rd_loss(Var image, std::span<const Var> grids, const DecoderVars& params, double lambda);

// ---------------------------------------------------------------------------
// Plain-tensor entry points.

Tensor upsample_all(const LatentGrids& latents, const Tensor& ups_kernel);
Tensor synthesize(const Tensor& features, std::span<const Tensor> syn);
ArmOutput arm_forward(const Tensor& grid, std::span<const Tensor> arm);
double latent_rate_bits(const LatentGrids& latents, std::span<const Tensor> arm);
Tensor decode_image(const LatentGrids& latents, const DecoderParams& params);
double rd_loss(const Tensor& image, const LatentGrids& latents, const DecoderParams& params, double lambda);

/// ARM evaluation at one position from its 8 context values. Used by the
/// entropy coder; matches arm_forward bit for bit.
ArmPrediction arm_predict(std::span<const double, kContextSize> context, std::span<const Tensor> arm);
/// Context values of position (y, x), zeros outside the grid.
std::array<double, kContextSize> context_at(const Tensor& grid, std::size_t y, std::size_t x);

double mse(const Tensor& a, const Tensor& b);

}  // namespace hcc
