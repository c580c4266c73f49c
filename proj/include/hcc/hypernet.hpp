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


// Hypernetwork weight modulation: a small conv backbone and one MLP head per
// decoder component predict additive deltas for the base decoder from the
// image itself. The deltas are quantized, Exp-Golomb coded and kept only when
// they lower the RD cost of the stream.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hcc/autograd.hpp"
#include "hcc/bytes.hpp"
#include "hcc/codec_model.hpp"
#include "hcc/no_coolchic.hpp"

namespace hcc {

inline constexpr std::array<std::size_t, 5> kBackboneChannels = {3, 16, 32, 64, 128};
inline constexpr std::size_t kHeadHidden = 64;

struct HyperNet {
  Architecture arch;
  /// conv weights and biases per stage: w [C_out,C_in,3,3], b [C_out].
  std::vector<Tensor> backbone;
  /// Per component: w1 [64,128], b1 [64], w2 [P_c,64], b2 [P_c].
  std::array<std::vector<Tensor>, kNumComponents> heads;
  ComponentMask enabled = kAllComponentsMask;

  /// Fan-in scaled uniform weights, zero biases, zero head output layers.
  static HyperNet initialize(const Architecture& arch, ComponentMask enabled, Rng& rng);
  /// Backbone then heads of enabled components, in component order.
  std::vector<Tensor> tensors() const;
  void set_tensors(std::span<const Tensor> tensors);

  bool operator==(const HyperNet&) const = default;
};

inline constexpr const char* kHyperNetTag = "HHM1";
inline constexpr std::uint8_t kHyperNetVersion = 1;

Bytes encode_hypernet(const HyperNet& h);
HyperNet decode_hypernet(std::span<const std::uint8_t> bytes);
void save_hypernet(const std::filesystem::path& path, const HyperNet& h);
HyperNet load_hypernet(const std::filesystem::path& path);

struct HyperNetVars {
  std::vector<Var> backbone;
  std::array<std::vector<Var>, kNumComponents> heads;
};

HyperNetVars bind_hypernet(Graph& g, const HyperNet& h, bool requires_grad);
/// Feature vector [128] of an image.
Var hypernet_features(Var image, std::span<const Var> backbone);
/// Flat [P_c] deltas per enabled component; invalid vars for the others.
std::array<Var, kNumComponents> hypernet_forward(Var image, const HyperNetVars& vars, ComponentMask enabled);

/// One forward pass; disabled components are absent. Step indices are 0.
Modulation predict_modulations(const Tensor& image, const HyperNet& h);

/// Base decoder vars with flat deltas added to the present components.
DecoderVars modulated_decoder(Graph& g, const DecoderParams& base, std::span<const Var, kNumComponents> deltas);

struct HyperTrainConfig {
  std::size_t steps = 200;
  std::size_t batch = 4;
  std::size_t patch = 256;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  ComponentMask components = kAllComponentsMask;
};

struct HyperTraining {
  HyperNet net;
  std::vector<double> losses;
};

/// Trains only the hypernetwork; the base model is read-only. The loss is
/// the latent rate under w + delta plus weighted distortion; modulation bits
/// are not part of it and deltas stay real-valued.
HyperTraining train_hypernet(std::span<const Tensor> corpus, const BaseModel& base, double lambda,
                             const HyperTrainConfig& config);

// ---------------------------------------------------------------------------
// Step search

inline constexpr std::array<Component, 3> kSearchOrder = {Component::kUps, Component::kSyn, Component::kArm};

/// Step index per component; nullopt means "not chosen yet".
using StepChoice = std::array<std::optional<std::uint8_t>, kNumComponents>;
using StepCost = std::function<double(const StepChoice&)>;

/// Greedy coordinate search over the 16 step indices, one component at a
/// time in `order`, each minimizing cost with the earlier choices fixed and
/// later components unset. Ties keep the smaller index (larger step).
std::array<std::uint8_t, kNumComponents> greedy_step_search(std::span<const Component> order, const StepCost& cost);

/// Modulation quantized (values rounded to step multiples) at its step indices.
Modulation quantize_modulation(const Modulation& delta);

/// Chooses per-component step indices for the present components of delta,
/// minimizing (modulation bits + latent bits) / (H*W) + lambda * D.
Modulation search_modulation_steps(const Tensor& image, const LatentGrids& latents, const BaseModel& base,
                                   const Modulation& delta, double lambda);

struct SwitchDecision {
  bool use = false;
  double cost_with = 0.0;
  double cost_without = 0.0;
};

/// Builds a mode 1 stream from base latents and a quantized modulation.
Bytes write_hyper_stream(const Tensor& image, const LatentGrids& latents, const BaseModel& base,
                         const Modulation& quantized);

/// Compares the RD cost of the mode 1 stream carrying `quantized` with the
/// mode 0 stream. Costs are file bits over pixels plus lambda * D of the
/// decoded image. `use` only on strict improvement.
SwitchDecision modulation_switch(const Tensor& image, const LatentGrids& latents, const BaseModel& base,
                                 const Modulation& quantized, double lambda);
/// Same, with the latents computed by the analysis transform.
SwitchDecision modulation_switch(const Tensor& image, const BaseModel& base, const Modulation& quantized,
                                 double lambda);

struct HyperEncodeOptions {
  /// Components allowed to carry modulations (intersected with h.enabled).
  ComponentMask components = kAllComponentsMask;
};

struct HyperEncodeResult {
  Bytes stream;
  SwitchDecision decision;
  Modulation modulation;  // quantized, after the step search
  LatentGrids latents;
  DecoderParams params;  // decoder of the emitted stream
  Tensor recon;
  std::uint64_t macs = 0;  // analysis and hypernetwork forward passes
};

HyperEncodeResult hyper_encode(const Tensor& image, const BaseModel& base, const HyperNet& h, double lambda,
                               const HyperEncodeOptions& options = {});

struct LaplaceFit {
  double location = 0.0;
  double b = 0.0;
  double std = 0.0;
};

/// Maximum-likelihood Laplace fit: location = median, b = mean absolute
/// deviation from it, std = sqrt(2) b.
LaplaceFit fit_laplace_std(std::span<const double> values);

}  // namespace hcc
