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


// Helpers shared by the unit tests and the acceptance runner.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hcc/autograd.hpp"
#include "hcc/tensor.hpp"

namespace hcc::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Builds a scalar loss from leaves bound to the given inputs. Called once
/// with gradients enabled and twice per input element without.
using LossFn = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheck {
  /// max over elements of |analytic - numeric| / max(|analytic|, 1)
  double max_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

/// Central differences with step h on every element of every input, or on
/// an evenly strided subset of at most `max_per_input` elements.
inline GradCheck check_gradients(const LossFn& f, const std::vector<Tensor>& inputs, double h = 1e-5,
                                 std::size_t max_per_input = 0) {
  auto eval = [&](const std::vector<Tensor>& xs, bool grad, std::vector<Tensor>* grads) {
    Graph g(grad);
    std::vector<Var> leaves;
    for (const auto& x : xs) leaves.push_back(g.leaf(x, grad));
    Var loss = f(g, leaves);
    if (grad) {
      g.backward(loss);
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        const Tensor& gr = g.grad(leaves[i]);
        grads->push_back(gr.empty() ? Tensor(xs[i].shape()) : gr);
      }
    }
    return loss.value().item();
  };

  std::vector<Tensor> analytic;
  eval(inputs, true, &analytic);
  GradCheck out;
  std::vector<Tensor> xs = inputs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const std::size_t n = xs[i].size();
    const std::size_t stride = max_per_input == 0 || n <= max_per_input ? 1 : (n + max_per_input - 1) / max_per_input;
    for (std::size_t j = 0; j < n; j += stride) {
      const double v = xs[i][j];
      xs[i][j] = v + h;
      const double up = eval(xs, false, nullptr);
      xs[i][j] = v - h;
      const double down = eval(xs, false, nullptr);
      xs[i][j] = v;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i][j];
      const double err = std::abs(a - numeric) / std::max(std::abs(a), 1.0);
      ++out.checked;
      if (err > out.max_error) {
        out.max_error = err;
        out.worst = "input " + std::to_string(i) + "[" + std::to_string(j) + "]: analytic " + std::to_string(a) +
                    " numeric " + std::to_string(numeric);
      }
    }
  }
  return out;
}

}  // namespace hcc::testing
