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

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hcc/tensor.hpp"

namespace hcc {

// Per-thread instrumentation. Every conv / transposed conv / linear call adds
// the multiply-accumulates it performs, forward and backward.
std::uint64_t& mac_counter();
// Number of Graph::backward() calls made on this thread.
std::uint64_t& backward_counter();

class Graph;

/// Handle to a value recorded in a Graph.
class Var {
 public:
  Var() = default;

  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Tape of executed operations. Nodes are appended in execution order, which
/// is a topological order; backward() replays them in reverse.
///
/// A Graph built with grad_enabled = false records values only and is the
/// inference path.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& grad_out)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient accumulated by the last backward(); empty if none reached v.
  const Tensor& grad(Var v) const { return node(v).grad; }

  /// Reverse-mode sweep from a scalar loss. Gradients from a previous sweep
  /// are cleared first.
  void backward(Var loss);

  // Op-author interface.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn, const char* name);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn, const char* name);
  /// Gradient buffer of v, zero-allocated on first use.
  Tensor& grad_buffer(Var v);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  bool grad_enabled_;
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. All inputs must live in the same Graph.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var square(Var a);
Var relu(Var a);
Var exp(Var a);
/// Clamp to [lo, hi]; gradient passes where lo <= a <= hi.
Var clamp(Var a, double lo, double hi);
Var sum(Var a);
Var mean(Var a);
Var mse(Var a, Var b);

Var reshape(Var a, Shape shape);
/// Contiguous slice [offset, offset + numel(shape)) of the flattened input.
Var slice(Var a, std::size_t offset, Shape shape);
/// Stacks equally shaped inputs along a new leading axis.
Var stack(std::span<const Var> parts);
/// Concatenates flattened inputs.
Var concat(std::span<const Var> parts);
/// Top-left crop of a [C,H,W] tensor.
Var crop(Var a, std::size_t h, std::size_t w);
/// Column j of an [M,K] tensor, as [M].
Var column(Var a, std::size_t j);

/// Cross-correlation of input [C_in,H,W] with kernel [C_out,C_in,k,k],
/// zero padding `pad`, optional bias [C_out].
Var conv2d(Var input, Var kernel, std::optional<Var> bias, std::size_t stride, std::size_t pad);

enum class EdgeMode { kZero, kReplicate };

/// Stride-2 transposed convolution with a 4x4 kernel [C_in,C_out,4,4],
/// output cropped symmetrically to exactly [C_out, 2H, 2W]. kReplicate pads
/// the input by edge replication first, so a partition-of-unity kernel maps
/// constants to constants up to the border.
Var transposed_conv2d(Var input, Var kernel, EdgeMode edge = EdgeMode::kZero);

/// Affine map over the last axis: input [M,D_in] or [D_in], weight
/// [D_out,D_in], bias [D_out].
Var linear(Var input, Var weight, Var bias);

/// Mean over non-overlapping factor x factor windows, ceil-sized output;
/// partial windows average their valid pixels.
Var avg_pool(Var input, std::size_t factor);
/// [C,H,W] -> [C].
Var global_mean_pool(Var input);

inline constexpr int kContextSize = 8;
/// Raster-causal neighbourhood offsets (dy, dx) used by the entropy model.
inline constexpr int kContextOffsets[kContextSize][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                                         {-2, 0},  {0, -2}, {-1, -2}, {-2, -1}};
/// [h,w] grid -> [h*w, 8] causal context rows, zeros outside the grid.
Var gather_context(Var grid);

/// Floor applied to quantized-symbol probabilities, log(2^-16).
inline constexpr double kLogProbFloor = -11.090354888959125;
/// log of the Laplace(mu, b) mass on [y - 1/2, y + 1/2], floored at 2^-16.
Var laplace_log_prob_box(Var y, Var mu, Var b);

/// y + U[-1/2, 1/2) elementwise, identity gradient.
Var quantize_noise(Var y, Rng& rng);
/// round(y) forward, identity gradient.
Var quantize_ste(Var y);

// Scalar kernels shared with non-graph code paths.
double laplace_log_prob_box(double y, double mu, double b);
/// Laplace mass on [y - 1/2, y + 1/2], unclamped.
double laplace_box_mass(double y, double mu, double b);

}  // namespace hcc
