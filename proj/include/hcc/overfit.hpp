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


// Per-image overfitting: latents and decoder parameters are optimized for one
// image, then the decoder is quantized and sent in full (mode 2). The
// optimization can start from scratch or from the N-O / hypernetwork outputs.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hcc/bitstream.hpp"
#include "hcc/codec_model.hpp"
#include "hcc/hypernet.hpp"
#include "hcc/no_coolchic.hpp"

namespace hcc {

enum class InitMode { kRandom, kNo, kHyper };

std::string_view init_name(InitMode m);
std::optional<InitMode> parse_init(std::string_view name);

inline constexpr std::size_t kFastSteps = 400;
inline constexpr std::size_t kSlowSteps = 5000;
/// "fast", "slow" or a step count.
std::optional<std::size_t> parse_preset(std::string_view name);

struct OverfitConfig {
  std::size_t steps = kFastSteps;
  /// Length of the learning-rate and quantization schedule; 0 means `steps`.
  /// A run stopped early with the same horizon is a prefix of the full run.
  std::size_t horizon = 0;
  InitMode init = InitMode::kRandom;
  std::uint64_t seed = 0;
  double lr_latent = 1e-2;
  double lr_param = 1e-3;
  /// Fraction of the horizon trained with the noise surrogate; the rest
  /// uses straight-through rounding at a reduced learning rate.
  double noise_fraction = 0.9;
  double ste_lr_scale = 0.1;
  /// Grid count for random initialization without a base model.
  Architecture arch;
};

struct EncodeStats {
  std::vector<double> losses;       // training loss of each step
  std::vector<double> best_losses;  // running minimum of `losses`
  std::size_t steps = 0;
  std::size_t best_step = 0;  // step whose state was encoded (steps == 0: init)
  StreamMode mode = StreamMode::kOverfitted;
  bool switch_used = false;
  std::array<std::uint8_t, kNumComponents> quant_steps{};
  double bpp = 0.0;
  double psnr = 0.0;
  double mse = 0.0;
  double rd_cost = 0.0;
  /// PSNR of the encoded state with rounded latents and unquantized
  /// parameters; equals `psnr` for single-pass streams.
  double float_psnr = 0.0;
  std::uint64_t macs = 0;
  double mac_per_pixel = 0.0;
};

struct EncodeResult {
  Bytes stream;
  EncodeStats stats;
  Tensor recon;
};

/// `base` is required for init no/hyper, `h` for init hyper.
EncodeResult overfit_encode(const Tensor& image, double lambda, const OverfitConfig& config,
                            const BaseModel* base = nullptr, const HyperNet* h = nullptr);

/// Chooses quantization step indices for ups, syn and arm greedily in that
/// order, minimizing (param bits + latent bits) / (H*W) + lambda * D with the
/// reconstruction decoded from the quantized parameters.
std::array<std::uint8_t, kNumComponents> rd_param_search(const Tensor& image, const LatentGrids& latents,
                                                        const DecoderParams& params, double lambda);

/// Mode 2 stream of integer latents and parameters quantized at `steps`.
Bytes write_overfitted_stream(const LatentGrids& latents, const DecoderParams& params,
                              const std::array<std::uint8_t, kNumComponents>& steps);

struct CurvePoint {
  std::size_t steps = 0;
  double bpp = 0.0;
  double psnr = 0.0;
  double mac_per_pixel = 0.0;
  double rd_cost = 0.0;
  EncodeResult result;
};

/// One optimization run over max(checkpoints) steps, encoding the best
/// state seen at each checkpoint. Point k equals overfit_encode with
/// steps = k and horizon = max(checkpoints).
std::vector<CurvePoint> finetune_curve(const Tensor& image, double lambda, const OverfitConfig& config,
                                       std::span<const std::size_t> checkpoints, const BaseModel* base = nullptr,
                                       const HyperNet* h = nullptr);

}  // namespace hcc
