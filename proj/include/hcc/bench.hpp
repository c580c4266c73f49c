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


// Benchmark harness: complexity accounting, BD-rate, corpus sweeps.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hcc/codec_model.hpp"
#include "hcc/hypernet.hpp"
#include "hcc/metrics.hpp"
#include "hcc/no_coolchic.hpp"
#include "hcc/overfit.hpp"

namespace hcc {

enum class EncodeMode { kNo, kHyper, kOverfit, kWarmstart };

std::string_view mode_name(EncodeMode m);
std::optional<EncodeMode> parse_mode(std::string_view name);

// ---------------------------------------------------------------------------
// Complexity

struct ComplexityItem {
  std::string name;
  std::uint64_t macs = 0;
};

struct ComplexityReport {
  std::vector<ComplexityItem> items;
  std::uint64_t total = 0;
  double per_pixel = 0.0;

  std::uint64_t get(std::string_view name) const;
};

/// Forward MACs of the decoder pieces run in one optimization step.
std::uint64_t upsampling_macs(std::size_t height, std::size_t width, std::size_t num_grids);
std::uint64_t synthesis_macs(std::size_t height, std::size_t width, std::size_t num_grids);
std::uint64_t arm_macs(std::size_t height, std::size_t width, std::size_t num_grids);
std::uint64_t analysis_macs(std::size_t height, std::size_t width, std::size_t num_grids);
std::uint64_t backbone_macs(std::size_t height, std::size_t width);
std::uint64_t head_macs(const Architecture& arch, ComponentMask components);

/// Analytic encoder MACs. Single-pass costs: analysis (no, hyper,
/// warmstart) and hypernetwork (hyper, warmstart). Optimizing modes add
/// steps x 3 x the forward cost of upsampling, synthesis and ARM: one
/// forward plus a backward pass costed at twice the forward.
ComplexityReport mac_count(const Architecture& arch, std::size_t height, std::size_t width, EncodeMode mode,
                           std::size_t steps, ComponentMask hyper_components = kAllComponentsMask);

// ---------------------------------------------------------------------------
// Encoding by mode

struct EncodeRequest {
  EncodeMode mode = EncodeMode::kNo;
  double lambda = 1e-3;
  std::size_t steps = kFastSteps;
  std::uint64_t seed = 0;
};

/// Runs one encoder. no/hyper: single pass; overfit: random init;
/// warmstart: overfitting from the hypernetwork output.
EncodeResult encode_image(const Tensor& image, const EncodeRequest& request, const BaseModel* base,
                          const HyperNet* h);

// ---------------------------------------------------------------------------
// BD-rate

struct RdPoint {
  double bpp = 0.0;
  double psnr = 0.0;
};

/// Average rate difference of `test` against `anchor` at equal PSNR, in
/// percent, from cubic least-squares fits of log10(rate) over PSNR.
/// Throws std::invalid_argument for fewer than 4 points, repeated PSNR
/// values or curves that do not overlap.
double bd_rate(std::span<const RdPoint> anchor, std::span<const RdPoint> test);

// ---------------------------------------------------------------------------
// Corpus runs

struct CsvRow {
  std::string image;
  double lambda = 0.0;
  double bpp = 0.0;
  double psnr = 0.0;
  double mac_per_pixel = 0.0;
  std::string mode_used;
  std::string switch_decision;
  double enc_ms = 0.0;
};

inline constexpr const char* kCsvHeader = "image,lambda,bpp,psnr,mac_per_pixel,mode_used,switch_decision,enc_ms";

std::string format_csv(std::span<const CsvRow> rows);
std::vector<CsvRow> parse_csv(std::string_view text);

struct CorpusOptions {
  EncodeMode mode = EncodeMode::kNo;
  std::vector<double> lambdas;
  std::size_t steps = kFastSteps;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  /// When set, every emitted stream is written there as <stem>_<lambda index>.hcc.
  std::optional<std::filesystem::path> streams_dir;
};

/// Rows ordered by file name, then lambda. Images are encoded in parallel
/// on `jobs` workers. Base models and hypernetworks are given either one
/// per lambda (same order as `lambdas`) or as a single model for all.
std::vector<CsvRow> run_corpus(const std::filesystem::path& dir, const CorpusOptions& options,
                               std::span<const BaseModel> bases, std::span<const HyperNet> hypers);

/// Per-lambda averages of bpp and PSNR over the rows, sorted by rate.
std::vector<RdPoint> average_curve(std::span<const CsvRow> rows);

/// Rate-distortion plot: one line per mode_used group of `rows`.
std::string rd_plot_svg(std::span<const CsvRow> rows, std::string_view title);

}  // namespace hcc
