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


// Non-overfitted coding: a learned analysis transform maps an image to its
// latent grids in one forward pass, and a universal decoder shared by all
// images reconstructs it. Nothing is optimized per image.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hcc/autograd.hpp"
#include "hcc/bytes.hpp"
#include "hcc/codec_model.hpp"

namespace hcc {

inline constexpr std::size_t kAnalysisHidden = 16;
inline constexpr std::size_t kAnalysisTensorsPerGrid = 6;

/// Per-grid analysis head: average-pool to the grid resolution, then
/// conv3x3 3->16, ReLU, conv3x3 16->16, ReLU, conv3x3 16->1 (all pad 1).
/// Tensors: w1 [16,3,3,3], b1 [16], w2 [16,16,3,3], b2 [16], w3 [1,16,3,3], b3 [1].
std::vector<Shape> analysis_head_shapes();

struct BaseModel {
  Architecture arch;
  std::vector<std::vector<Tensor>> alpha;  // one head per grid
  DecoderParams w;
  double lambda = 0.0;

  static BaseModel initialize(const Architecture& arch, double lambda, Rng& rng);
  /// alpha heads (grid order) followed by ups, syn and arm tensors.
  std::vector<Tensor> tensors() const;
  void set_tensors(std::span<const Tensor> tensors);

  bool operator==(const BaseModel&) const = default;
};

inline constexpr const char* kBaseModelTag = "HCM1";
inline constexpr std::uint8_t kBaseModelVersion = 1;

Bytes encode_base_model(const BaseModel& model);
BaseModel decode_base_model(std::span<const std::uint8_t> bytes);
void save_base_model(const std::filesystem::path& path, const BaseModel& model);
BaseModel load_base_model(const std::filesystem::path& path);
/// Hash trailer of the serialized model; referenced by mode 0/1 streams.
ModelId model_id(const BaseModel& model);

/// Real-valued head outputs, one [h_i, w_i] var per grid.
std::vector<Var> analysis_forward(Var image, std::span<const std::vector<Var>> alpha);
/// Head outputs before rounding.
std::vector<Tensor> analysis_raw(const Tensor& image, const BaseModel& model);
/// Latents of an image: head outputs rounded and clamped to the alphabet.
LatentGrids analysis(const Tensor& image, const BaseModel& model);

struct BaseTrainConfig {
  std::size_t steps = 200;
  std::size_t batch = 4;
  std::size_t patch = 256;
  std::uint64_t seed = 0;
  double lr = 5e-3;
  Architecture arch;
};

struct BaseTraining {
  BaseModel model;
  std::vector<double> losses;  // mean batch loss per step
};

/// Joint training of analysis and decoder on random patches, noise
/// quantization surrogate on the latents, Adam with cosine decay.
BaseTraining train_base(std::span<const Tensor> corpus, double lambda, const BaseTrainConfig& config);

/// Crop [3, size, size] at (y, x).
Tensor crop_patch(const Tensor& image, std::size_t y, std::size_t x, std::size_t size);
/// Random square patch; the whole image when it is not larger than `size`
/// in both directions.
Tensor random_patch(const Tensor& image, std::size_t size, Rng& rng);

/// Mode 0 stream: analysis latents coded under the base entropy model.
Bytes no_encode(const Tensor& image, const BaseModel& base);

}  // namespace hcc
