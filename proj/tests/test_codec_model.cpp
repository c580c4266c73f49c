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


#include <cmath>

#include "doctest.h"
#include "hcc/codec_model.hpp"
#include "support.hpp"

using namespace hcc;
using hcc::testing::max_abs_diff;
using hcc::testing::random_tensor;

namespace {

DecoderParams perturbed_params(const Architecture& arch, std::uint64_t seed, double amount = 0.2) {
  Rng rng(seed);
  DecoderParams p = DecoderParams::initialize(arch, rng);
  for (Component c : kAllComponents)
    for (auto& t : p[c])
      for (auto& v : t.data()) v += rng.uniform(-amount, amount);
  return p;
}

LatentGrids random_integer_latents(std::size_t h, std::size_t w, std::size_t n, Rng& rng, int span = 3) {
  LatentGrids l = init_latents(h, w, n);
  for (auto& g : l.grids)
    for (auto& v : g.data()) v = static_cast<double>(static_cast<int>(rng.index(2 * span + 1)) - span);
  return l;
}

double relu_d(double v) { return v > 0.0 ? v : 0.0; }

// Synthesis evaluated layer by layer with plain loops.
Tensor synth_oracle(const Tensor& f, std::span<const Tensor> syn) {
  const std::size_t n = f.dim(0), h = f.dim(1), w = f.dim(2);
  Tensor h1({kSynHidden, h, w}), h2({kSynHidden, h, w}), out({3, h, w});
  for (std::size_t o = 0; o < kSynHidden; ++o)
    for (std::size_t p = 0; p < h * w; ++p) {
      double s = syn[1][o];
      for (std::size_t i = 0; i < n; ++i) s += syn[0][o * n + i] * f[i * h * w + p];
      h1[o * h * w + p] = relu_d(s);
    }
  for (std::size_t o = 0; o < kSynHidden; ++o)
    for (std::size_t p = 0; p < h * w; ++p) {
      double s = syn[3][o];
      for (std::size_t i = 0; i < kSynHidden; ++i) s += syn[2][o * kSynHidden + i] * h1[i * h * w + p];
      h2[o * h * w + p] = relu_d(s);
    }
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double s = syn[5][o];
        for (std::size_t i = 0; i < kSynHidden; ++i)
          for (std::size_t ky = 0; ky < 3; ++ky)
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const long yy = static_cast<long>(y + ky) - 1, xx = static_cast<long>(x + kx) - 1;
              if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
              s += syn[4][((o * kSynHidden + i) * 3 + ky) * 3 + kx] * h2.at(i, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            }
        out.at(o, y, x) = std::clamp(s, 0.0, 1.0);
      }
  return out;
}

ArmPrediction arm_oracle(const std::array<double, kContextSize>& ctx, std::span<const Tensor> arm) {
  std::vector<double> h1(kArmHidden), h2(kArmHidden);
  for (std::size_t o = 0; o < kArmHidden; ++o) {
    double s = arm[1][o];
    for (std::size_t i = 0; i < kContextSize; ++i) s += arm[0][o * kContextSize + i] * ctx[i];
    h1[o] = relu_d(s);
  }
  for (std::size_t o = 0; o < kArmHidden; ++o) {
    double s = arm[3][o];
    for (std::size_t i = 0; i < kArmHidden; ++i) s += arm[2][o * kArmHidden + i] * h1[i];
    h2[o] = relu_d(s);
  }
  double out[2];
  for (std::size_t o = 0; o < 2; ++o) {
    double s = arm[5][o];
    for (std::size_t i = 0; i < kArmHidden; ++i) s += arm[4][o * kArmHidden + i] * h2[i];
    out[o] = s;
  }
  return {out[0], std::exp(out[1]) + kArmScaleFloor};
}

}  // namespace

TEST_CASE("dyadic schedule") {
  auto a = init_latents(8, 8, 3);
  REQUIRE(a.num_grids() == 3);
  CHECK(a.grids[0].shape() == Shape{8, 8});
  CHECK(a.grids[1].shape() == Shape{4, 4});
  CHECK(a.grids[2].shape() == Shape{2, 2});
  for (const auto& g : a.grids)
    for (double v : g.data()) CHECK(v == 0.0);
  auto b = init_latents(7, 5, 2);
  CHECK(b.grids[1].shape() == Shape{4, 3});
  auto c = init_latents(512, 768, 7);
  CHECK(c.grids[6].shape() == Shape{8, 12});
  CHECK_THROWS(init_latents(4, 4, 0));
  CHECK_THROWS(init_latents(4, 4, 9));

  LatentGrids bad = init_latents(8, 8, 2);
  bad.grids[1] = Tensor({3, 4});
  CHECK_THROWS_AS(check_schedule(bad), ShapeError);
}

TEST_CASE("latent quantization rounds half away from zero and clamps") {
  LatentGrids l = init_latents(1, 4, 1);
  l.grids[0] = Tensor({1, 4}, {0.5, -0.5, 300.2, -999.0});
  auto q = quantize_latents(l);
  CHECK(q.grids[0] == Tensor({1, 4}, {1.0, -1.0, 255.0, -256.0}));
}

TEST_CASE("parameter layout") {
  const Architecture arch{3};
  CHECK(component_size(Component::kUps, arch) == 16);
  CHECK(component_size(Component::kSyn, arch) == 16 * 3 + 16 + 256 + 16 + 3 * 16 * 9 + 3);
  CHECK(component_size(Component::kArm, arch) == 16 * 8 + 16 + 256 + 16 + 32 + 2);
  auto p = perturbed_params(arch, 1);
  for (Component c : kAllComponents) {
    auto flat = flatten(p[c]);
    CHECK(flat.size() == component_size(c, arch));
    auto shapes = component_shapes(c, arch);
    CHECK(unflatten(flat, shapes) == p[c]);
  }
  CHECK(p.num_grids() == 3);
  CHECK(parse_component_list("arm,ups") == (mask_of(Component::kArm) | mask_of(Component::kUps)));
  CHECK_THROWS_AS(parse_component_list("ups,foo"), std::invalid_argument);
}

TEST_CASE("upsampling") {
  const Tensor bil = bilinear_kernel();
  SUBCASE("constants stay constant") {
    LatentGrids l = init_latents(13, 9, 4);
    for (auto& g : l.grids) g.fill(-2.5);
    Tensor f = upsample_all(l, bil);
    REQUIRE(f.shape() == Shape{4, 13, 9});
    for (double v : f.data()) CHECK(std::abs(v + 2.5) <= 1e-9);
  }
  SUBCASE("grid 0 is untouched") {
    Rng rng(2);
    LatentGrids l = random_integer_latents(6, 7, 3, rng);
    Tensor f = upsample_all(l, random_tensor({1, 1, 4, 4}, rng));
    for (std::size_t i = 0; i < 42; ++i) CHECK(f[i] == l.grids[0][i]);
  }
  SUBCASE("impulse in grid 1 yields the stencil") {
    LatentGrids l = init_latents(8, 8, 2);
    l.grids[1][1 * 4 + 2] = 1.0;
    Tensor f = upsample_all(l, bil);
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) {
        const bool in = y >= 1 && y <= 4 && x >= 3 && x <= 6;
        const double expected = in ? bil[(y - 1) * 4 + (x - 3)] : 0.0;
        CHECK(f.at(1, y, x) == doctest::Approx(expected).epsilon(1e-15));
      }
  }
}

TEST_CASE("synthesis") {
  const Architecture arch{3};
  SUBCASE("zero features and zero biases give black") {
    Rng rng(3);
    DecoderParams p = DecoderParams::initialize(arch, rng);
    p[Component::kSyn][5].fill(0.0);
    Tensor out = synthesize(Tensor({3, 4, 5}), p[Component::kSyn]);
    for (double v : out.data()) CHECK(v == 0.0);
  }
  SUBCASE("zero weights and a final bias give a constant image") {
    DecoderParams p = DecoderParams::zeros(arch);
    p[Component::kSyn][5].fill(0.25);
    Rng rng(4);
    Tensor out = synthesize(random_tensor({3, 4, 5}, rng), p[Component::kSyn]);
    for (double v : out.data()) CHECK(v == 0.25);
  }
  SUBCASE("layer-by-layer oracle") {
    Rng rng(5);
    DecoderParams p = perturbed_params(arch, 5);
    Tensor f = random_tensor({3, 6, 7}, rng, -2.0, 2.0);
    CHECK(max_abs_diff(synthesize(f, p[Component::kSyn]), synth_oracle(f, p[Component::kSyn])) <= 1e-12);
  }
  SUBCASE("channel mismatch") {
    DecoderParams p = DecoderParams::zeros(arch);
    CHECK_THROWS_AS(synthesize(Tensor({2, 4, 4}), p[Component::kSyn]), ShapeError);
  }
}

TEST_CASE("autoregressive entropy model") {
  const Architecture arch{3};
  const DecoderParams p = perturbed_params(arch, 6, 0.5);
  const auto& arm = p[Component::kArm];
  Rng rng(6);

  SUBCASE("top-left positions share one prediction") {
    Tensor a = random_tensor({5, 5}, rng, -4, 4), b = random_tensor({3, 2}, rng, -4, 4);
    auto oa = arm_forward(a, arm), ob = arm_forward(b, arm);
    CHECK(oa.mu[0] == ob.mu[0]);
    CHECK(oa.b[0] == ob.b[0]);
  }
  SUBCASE("causality, exhaustive on 6x6") {
    Tensor grid = random_tensor({6, 6}, rng, -3, 3);
    const auto ref = arm_forward(grid, arm);
    for (std::size_t q = 0; q < 36; ++q) {
      Tensor g2 = grid;
      g2[q] += 1.75;
      const auto out = arm_forward(g2, arm);
      for (std::size_t pos = 0; pos <= q; ++pos) {
        CHECK(out.mu[pos] == ref.mu[pos]);
        CHECK(out.b[pos] == ref.b[pos]);
      }
    }
  }
  SUBCASE("sliding-window oracle and per-position predictions") {
    Tensor grid = random_tensor({5, 7}, rng, -3, 3);
    const auto out = arm_forward(grid, arm);
    for (std::size_t y = 0; y < 5; ++y)
      for (std::size_t x = 0; x < 7; ++x) {
        std::array<double, kContextSize> ctx{};
        for (int c = 0; c < kContextSize; ++c) {
          const long yy = static_cast<long>(y) + kContextOffsets[c][0], xx = static_cast<long>(x) + kContextOffsets[c][1];
          if (yy >= 0 && xx >= 0 && yy < 5 && xx < 7) ctx[static_cast<std::size_t>(c)] = grid[static_cast<std::size_t>(yy * 7 + xx)];
        }
        CHECK(context_at(grid, y, x) == ctx);
        const auto ref = arm_oracle(ctx, arm);
        CHECK(std::abs(out.mu[y * 7 + x] - ref.mu) <= 1e-12);
        CHECK(std::abs(out.b[y * 7 + x] - ref.b) <= 1e-12);
        const auto pred = arm_predict(ctx, arm);
        CHECK(pred.mu == out.mu[y * 7 + x]);
        CHECK(pred.b == out.b[y * 7 + x]);
      }
  }
  SUBCASE("scale is positive") {
    Tensor grid = random_tensor({4, 4}, rng, -50, 50);
    for (double b : arm_forward(grid, arm).b.data()) CHECK(b > 0.0);
  }
}

TEST_CASE("latent rate") {
  const Architecture arch{1};
  SUBCASE("closed form at mu 0, b 1") {
    DecoderParams p = DecoderParams::zeros(arch);
    p[Component::kArm][5][1] = std::log(1.0 - kArmScaleFloor);
    LatentGrids l = init_latents(1, 1, 1);
    CHECK(latent_rate_bits(l, p[Component::kArm]) == doctest::Approx(-std::log2(1.0 - std::exp(-0.5))).epsilon(1e-12));
    CHECK(latent_rate_bits(l, p[Component::kArm]) == doctest::Approx(1.3459).epsilon(1e-4));
  }
  SUBCASE("tail symbols cost exactly 16 bits") {
    DecoderParams p = DecoderParams::zeros(arch);
    p[Component::kArm][5][1] = std::log(0.01);
    LatentGrids l = init_latents(1, 1, 1);
    l.grids[0][0] = 40.0;
    CHECK(latent_rate_bits(l, p[Component::kArm]) == doctest::Approx(16.0).epsilon(1e-12));
  }
  SUBCASE("summation oracle") {
    const DecoderParams p = perturbed_params(Architecture{2}, 7, 0.5);
    Rng rng(7);
    LatentGrids l = random_integer_latents(4, 4, 2, rng);
    double ref = 0.0;
    for (const auto& g : l.grids)
      for (std::size_t y = 0; y < g.dim(0); ++y)
        for (std::size_t x = 0; x < g.dim(1); ++x) {
          const auto pr = arm_predict(context_at(g, y, x), p[Component::kArm]);
          ref -= laplace_log_prob_box(g[y * g.dim(1) + x], pr.mu, pr.b) / std::log(2.0);
        }
    CHECK(std::abs(latent_rate_bits(l, p[Component::kArm]) - ref) <= 1e-9);
  }
}

TEST_CASE("decode and rd loss") {
  const Architecture arch{3};
  Rng rng(8);
  SUBCASE("zero latents with zero-bias synthesis give black") {
    DecoderParams p = DecoderParams::initialize(arch, rng);
    p[Component::kSyn][5].fill(0.0);
    Tensor img = decode_image(init_latents(6, 6, 3), p);
    for (double v : img.data()) CHECK(v == 0.0);
  }
  const DecoderParams p = perturbed_params(arch, 8);
  const LatentGrids l = random_integer_latents(8, 6, 3, rng);
  const Tensor image = random_tensor({3, 8, 6}, rng, 0.0, 1.0);
  SUBCASE("decode is the composition of its parts and deterministic") {
    Tensor d = decode_image(l, p);
    CHECK(d == synthesize(upsample_all(l, p[Component::kUps][0]), p[Component::kSyn]));
    CHECK(d == decode_image(l, p));
    Graph g(true);
    auto grids = bind_latents(g, l, true);
    CHECK(decode_image(grids, bind_params(g, p, true)).value() == d);
  }
  SUBCASE("lambda 0 gives the rate") {
    const double bpp = latent_rate_bits(l, p[Component::kArm]) / 48.0;
    CHECK(rd_loss(image, l, p, 0.0) == bpp);
  }
  SUBCASE("perfect reconstruction gives the rate") {
    const Tensor recon = decode_image(l, p);
    const double bpp = latent_rate_bits(l, p[Component::kArm]) / 48.0;
    CHECK(rd_loss(recon, l, p, 0.37) == bpp);
  }
  SUBCASE("recomputation from sub-ops") {
    const double lambda = 4e-3;
    const double expected = latent_rate_bits(l, p[Component::kArm]) / 48.0 +
                            lambda * kDistortionScale * mse(image, decode_image(l, p));
    CHECK(std::abs(rd_loss(image, l, p, lambda) - expected) <= 1e-9);
  }
}

TEST_CASE("modulations") {
  const Architecture arch{2};
  const DecoderParams p = perturbed_params(arch, 9);
  Modulation zero;
  for (Component c : kAllComponents) zero.deltas[index_of(c)] = std::vector<double>(component_size(c, arch), 0.0);
  CHECK(apply_modulations(p, zero) == p);
  CHECK(zero.present() == kAllComponentsMask);

  Rng rng(9);
  Modulation d;
  d.deltas[1] = std::vector<double>(component_size(Component::kSyn, arch));
  for (auto& v : *d.deltas[1]) v = rng.uniform(-0.3, 0.3);
  DecoderParams pe = apply_modulations(p, d);
  CHECK(pe[Component::kUps] == p[Component::kUps]);
  CHECK(pe[Component::kArm] == p[Component::kArm]);
  Modulation neg = d;
  for (auto& v : *neg.deltas[1]) v = -v;
  DecoderParams back = apply_modulations(pe, neg);
  for (std::size_t i = 0; i < p[Component::kSyn].size(); ++i)
    CHECK(max_abs_diff(back[Component::kSyn][i], p[Component::kSyn][i]) <= 1e-15);

  Modulation wrong;
  wrong.deltas[0] = std::vector<double>(3, 0.0);
  CHECK_THROWS_AS(apply_modulations(p, wrong), ShapeError);
}
