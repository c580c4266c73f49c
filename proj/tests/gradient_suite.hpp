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


// Finite-difference checks of every differentiable operation and of the
// composed losses. Shared by the tensor-core unit tests and the acceptance
// runner.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hcc/codec_model.hpp"
#include "hcc/hypernet.hpp"
#include "hcc/no_coolchic.hpp"
#include "support.hpp"

namespace hcc::testing {

struct GradCase {
  std::string name;
  GradCheck result;
};

inline std::vector<GradCase> run_gradient_suite() {
  std::vector<GradCase> out;
  Rng rng(20260101);
  auto rt = [&](Shape s, double lo = -1.0, double hi = 1.0) { return random_tensor(std::move(s), rng, lo, hi); };
  auto run = [&](std::string name, const LossFn& f, std::vector<Tensor> inputs, std::size_t max_per_input = 0) {
    out.push_back({std::move(name), check_gradients(f, inputs, 1e-5, max_per_input)});
  };
  // A fixed random projection turns tensor outputs into a scalar with
  // nontrivial upstream gradients.
  auto project = [](Var v, std::uint64_t seed) {
    Rng r(seed);
    Tensor w = random_tensor(v.shape(), r);
    return sum(mul(v, v.graph()->constant(std::move(w))));
  };

  run("add", [&](Graph&, auto x) { return project(add(x[0], x[1]), 1); }, {rt({3, 4}), rt({3, 4})});
  run("sub", [&](Graph&, auto x) { return project(sub(x[0], x[1]), 2); }, {rt({3, 4}), rt({3, 4})});
  run("mul", [&](Graph&, auto x) { return project(mul(x[0], x[1]), 3); }, {rt({3, 4}), rt({3, 4})});
  run("scale", [&](Graph&, auto x) { return project(scale(x[0], -1.7), 4); }, {rt({5})});
  run("add_scalar", [&](Graph&, auto x) { return project(add_scalar(x[0], 0.3), 5); }, {rt({5})});
  run("square", [&](Graph&, auto x) { return project(square(x[0]), 6); }, {rt({2, 5})});
  run("relu", [&](Graph&, auto x) { return project(relu(x[0]), 7); }, {rt({4, 5})});
  run("exp", [&](Graph&, auto x) { return project(exp(x[0]), 8); }, {rt({4, 5})});
  run("clamp", [&](Graph&, auto x) { return project(clamp(x[0], -0.5, 0.6), 9); }, {rt({4, 5})});
  run("sum", [&](Graph&, auto x) { return square(sum(x[0])); }, {rt({3, 3})});
  run("mean", [&](Graph&, auto x) { return square(mean(x[0])); }, {rt({3, 3})});
  run("mse", [&](Graph&, auto x) { return mse(x[0], x[1]); }, {rt({2, 3, 3}), rt({2, 3, 3})});
  run("reshape", [&](Graph&, auto x) { return project(reshape(x[0], {6, 2}), 10); }, {rt({3, 4})});
  run("slice", [&](Graph&, auto x) { return project(slice(x[0], 3, {2, 2}), 11); }, {rt({3, 4})});
  run("stack", [&](Graph&, auto x) { return project(stack(std::vector<Var>{x[0], x[1]}), 12); },
      {rt({2, 3}), rt({2, 3})});
  run("concat", [&](Graph&, auto x) { return project(concat(std::vector<Var>{x[0], x[1]}), 13); },
      {rt({2, 3}), rt({4})});
  run("crop", [&](Graph&, auto x) { return project(crop(x[0], 3, 2), 14); }, {rt({2, 4, 4})});
  run("column", [&](Graph&, auto x) { return project(column(x[0], 1), 15); }, {rt({5, 3})});
  run("conv2d", [&](Graph&, auto x) { return project(conv2d(x[0], x[1], x[2], 1, 1), 16); },
      {rt({2, 5, 6}), rt({3, 2, 3, 3}), rt({3})});
  run("conv2d_stride2", [&](Graph&, auto x) { return project(conv2d(x[0], x[1], std::nullopt, 2, 1), 17); },
      {rt({2, 7, 6}), rt({2, 2, 3, 3})});
  run("conv2d_squared", [&](Graph&, auto x) { return scale(sum(square(conv2d(x[0], x[1], std::nullopt, 1, 0))), 0.5); },
      {rt({2, 5, 5}), rt({3, 2, 3, 3})});
  run("transposed_conv2d_zero",
      [&](Graph&, auto x) { return project(transposed_conv2d(x[0], x[1], EdgeMode::kZero), 18); },
      {rt({2, 3, 4}), rt({2, 2, 4, 4})});
  run("transposed_conv2d_replicate",
      [&](Graph&, auto x) { return project(transposed_conv2d(x[0], x[1], EdgeMode::kReplicate), 19); },
      {rt({1, 4, 3}), rt({1, 1, 4, 4})});
  run("linear_vector", [&](Graph&, auto x) { return project(linear(x[0], x[1], x[2]), 20); },
      {rt({4}), rt({3, 4}), rt({3})});
  run("linear_matrix", [&](Graph&, auto x) { return project(linear(x[0], x[1], x[2]), 21); },
      {rt({5, 4}), rt({3, 4}), rt({3})});
  run("avg_pool", [&](Graph&, auto x) { return project(avg_pool(x[0], 2), 22); }, {rt({2, 5, 7})});
  run("global_mean_pool", [&](Graph&, auto x) { return project(global_mean_pool(x[0]), 23); }, {rt({3, 4, 5})});
  run("gather_context", [&](Graph&, auto x) { return project(gather_context(x[0]), 24); }, {rt({4, 5})});
  run("laplace_log_prob_box",
      [&](Graph&, auto x) {
        Var b = add_scalar(exp(x[2]), kArmScaleFloor);
        return sum(laplace_log_prob_box(x[0], x[1], b));
      },
      {rt({12}, -3.0, 3.0), rt({12}, -1.0, 1.0), rt({12}, -1.0, 1.0)});
  run("quantize_noise",
      [&](Graph&, auto x) {
        Rng r(77);
        return project(quantize_noise(x[0], r), 25);
      },
      {rt({6})});

  // Composed losses.
  {
    const Architecture arch{3};
    Rng prng(5);
    DecoderParams params = DecoderParams::initialize(arch, prng);
    for (Component c : kAllComponents) {
      for (auto& t : params[c]) {
        for (auto& v : t.data()) v += prng.uniform(-0.1, 0.1);
      }
    }
    LatentGrids lat = init_latents(8, 8, 3);
    for (auto& grid : lat.grids) {
      for (auto& v : grid.data()) v = prng.uniform(-2.0, 2.0);
    }
    Tensor image = random_tensor({3, 8, 8}, prng, 0.0, 1.0);
    std::vector<Tensor> inputs = lat.grids;
    for (Component c : kAllComponents) inputs.insert(inputs.end(), params[c].begin(), params[c].end());
    run("rd_loss",
        [&](Graph& g, auto x) {
          Rng r(11);
          std::vector<Var> grids;
          for (std::size_t i = 0; i < 3; ++i) grids.push_back(quantize_noise(x[i], r));
          DecoderVars dv;
          std::size_t k = 3;
          for (Component c : kAllComponents) {
            for (std::size_t j = 0; j < params[c].size(); ++j) dv[c].push_back(x[k++]);
          }
          return rd_loss(g.constant(image), grids, dv, 1e-3).loss;
        },
        inputs);
  }
  {
    Rng mrng(6);
    const Architecture arch{2};
    BaseModel base = BaseModel::initialize(arch, 1e-3, mrng);
    Tensor image = random_tensor({3, 8, 8}, mrng, 0.0, 1.0);
    std::vector<Tensor> inputs;
    for (const auto& head : base.alpha) inputs.insert(inputs.end(), head.begin(), head.end());
    run("analysis_forward",
        [&](Graph& g, auto x) {
          std::vector<std::vector<Var>> alpha(arch.num_grids);
          std::size_t k = 0;
          for (auto& head : alpha) {
            for (std::size_t j = 0; j < kAnalysisTensorsPerGrid; ++j) head.push_back(x[k++]);
          }
          auto outs = analysis_forward(g.constant(image), alpha);
          Var total = project(outs[0], 30);
          for (std::size_t i = 1; i < outs.size(); ++i) total = add(total, project(outs[i], 30 + i));
          return total;
        },
        inputs, 200);

    HyperNet h = HyperNet::initialize(arch, kAllComponentsMask, mrng);
    for (auto& head : h.heads) {
      for (auto& v : head[2].data()) v = mrng.uniform(-0.05, 0.05);
    }
    std::vector<Tensor> hin = h.backbone;
    hin.insert(hin.end(), h.heads[1].begin(), h.heads[1].end());
    run("hypernet_forward",
        [&](Graph& g, auto x) {
          HyperNetVars vars;
          vars.backbone.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(h.backbone.size()));
          for (std::size_t c = 0; c < kNumComponents; ++c) {
            if (c == 1) {
              vars.heads[c].assign(x.begin() + static_cast<std::ptrdiff_t>(h.backbone.size()), x.end());
            } else {
              for (const auto& t : h.heads[c]) vars.heads[c].push_back(g.constant(t));
            }
          }
          auto deltas = hypernet_forward(g.constant(image), vars, mask_of(Component::kSyn));
          return project(deltas[1], 40);
        },
        hin, 48);
  }
  return out;
}

}  // namespace hcc::testing
