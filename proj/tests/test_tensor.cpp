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
#include <numeric>

#include "doctest.h"
#include "gradient_suite.hpp"
#include "hcc/autograd.hpp"
#include "hcc/optim.hpp"
#include "hcc/tensor.hpp"
#include "support.hpp"

using namespace hcc;
using hcc::testing::max_abs_diff;
using hcc::testing::random_tensor;

namespace {

Tensor conv_oracle(const Tensor& x, const Tensor& k, const Tensor* bias, std::size_t stride, std::size_t pad) {
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = k.dim(0), ks = k.dim(2);
  const std::size_t ho = (h + 2 * pad - ks) / stride + 1, wo = (w + 2 * pad - ks) / stride + 1;
  Tensor out({cout, ho, wo});
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double s = bias ? (*bias)[co] : 0.0;
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t ky = 0; ky < ks; ++ky)
            for (std::size_t kx = 0; kx < ks; ++kx) {
              const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
              s += k[((co * cin + ci) * ks + ky) * ks + kx] * x.at(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
        out.at(co, oy, ox) = s;
      }
  return out;
}

// Full stride-2 transposed convolution by scattering every input pixel,
// then the symmetric one-pixel crop.
Tensor tconv_oracle(const Tensor& x, const Tensor& k) {
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2), cout = k.dim(1);
  Tensor full({cout, 2 * h + 2, 2 * w + 2});
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx)
          for (std::size_t ty = 0; ty < 4; ++ty)
            for (std::size_t tx = 0; tx < 4; ++tx)
              full.at(co, 2 * y + ty, 2 * xx + tx) += x.at(ci, y, xx) * k[((ci * cout + co) * 4 + ty) * 4 + tx];
  Tensor out({cout, 2 * h, 2 * w});
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t xx = 0; xx < 2 * w; ++xx) out.at(co, y, xx) = full.at(co, y + 1, xx + 1);
  return out;
}

Tensor eval1(const std::function<Var(Graph&)>& f) {
  Graph g(false);
  return f(g).value();
}

}  // namespace

TEST_CASE("tensor construction and shape checks") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  CHECK_THROWS(t.item());
  t[2] = std::nan("");
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(t.check_finite("test"), NonFiniteError);
}

TEST_CASE("rng is reproducible and uniform in range") {
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("conv2d") {
  Rng rng(1);
  SUBCASE("identity 1x1 kernel") {
    Tensor x = random_tensor({3, 5, 4}, rng);
    Tensor k({3, 3, 1, 1});
    for (std::size_t c = 0; c < 3; ++c) k[c * 3 + c] = 1.0;
    Tensor y = eval1([&](Graph& g) { return conv2d(g.constant(x), g.constant(k), std::nullopt, 1, 0); });
    CHECK(y == x);
  }
  SUBCASE("overlap counting") {
    Tensor y = eval1([&](Graph& g) {
      return conv2d(g.constant(Tensor({1, 4, 4}, 1.0)), g.constant(Tensor({1, 1, 3, 3}, 1.0)), std::nullopt, 1, 1);
    });
    CHECK(y.at(0, 1, 1) == 9.0);
    CHECK(y.at(0, 2, 2) == 9.0);
    CHECK(y.at(0, 0, 0) == 4.0);
    CHECK(y.at(0, 3, 3) == 4.0);
    CHECK(y.at(0, 0, 3) == 4.0);
    CHECK(y.at(0, 0, 1) == 6.0);
  }
  SUBCASE("loop oracle") {
    Tensor x = random_tensor({2, 8, 8}, rng), k = random_tensor({4, 2, 3, 3}, rng), b = random_tensor({4}, rng);
    for (std::size_t stride : {1u, 2u}) {
      for (std::size_t pad : {0u, 1u}) {
        Tensor y = eval1([&](Graph& g) { return conv2d(g.constant(x), g.constant(k), g.constant(b), stride, pad); });
        Tensor ref = conv_oracle(x, k, &b, stride, pad);
        REQUIRE(y.shape() == ref.shape());
        CHECK(max_abs_diff(y, ref) <= 1e-12);
      }
    }
  }
  SUBCASE("shape mismatch names the dims") {
    Graph g(false);
    try {
      conv2d(g.constant(Tensor({2, 4, 4})), g.constant(Tensor({1, 3, 3, 3})), std::nullopt, 1, 1);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find('3') != std::string::npos);
    }
  }
}

TEST_CASE("transposed_conv2d") {
  Rng rng(2);
  const Tensor bil = bilinear_kernel();
  SUBCASE("partition of unity") {
    for (EdgeMode edge : {EdgeMode::kZero, EdgeMode::kReplicate}) {
      Tensor y = eval1([&](Graph& g) { return transposed_conv2d(g.constant(Tensor({1, 5, 6}, 0.7)), g.constant(bil), edge); });
      for (std::size_t yy = 1; yy + 1 < y.dim(1); ++yy)
        for (std::size_t xx = 1; xx + 1 < y.dim(2); ++xx) CHECK(std::abs(y.at(0, yy, xx) - 0.7) <= 1e-9);
      if (edge == EdgeMode::kReplicate) {
        for (double v : y.data()) CHECK(std::abs(v - 0.7) <= 1e-9);
      }
    }
  }
  SUBCASE("impulse response is the cropped stencil") {
    Tensor y = eval1([&](Graph& g) { return transposed_conv2d(g.constant(Tensor({1, 1, 1}, 1.0)), g.constant(bil)); });
    REQUIRE(y.shape() == Shape{1, 2, 2});
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) CHECK(y.at(0, a, b) == bil[(a + 1) * 4 + b + 1]);
  }
  SUBCASE("scatter-add oracle") {
    Tensor x = random_tensor({2, 5, 3}, rng), k = random_tensor({2, 3, 4, 4}, rng);
    Tensor y = eval1([&](Graph& g) { return transposed_conv2d(g.constant(x), g.constant(k)); });
    CHECK(max_abs_diff(y, tconv_oracle(x, k)) <= 1e-12);
  }
  SUBCASE("non-square kernel") {
    Graph g(false);
    CHECK_THROWS_AS(transposed_conv2d(g.constant(Tensor({1, 2, 2})), g.constant(Tensor({1, 1, 4, 3}))), ShapeError);
  }
}

TEST_CASE("linear") {
  Rng rng(3);
  SUBCASE("identity") {
    Tensor x = random_tensor({4}, rng), w({4, 4});
    for (std::size_t i = 0; i < 4; ++i) w[i * 5] = 1.0;
    CHECK(eval1([&](Graph& g) { return linear(g.constant(x), g.constant(w), g.constant(Tensor({4}))); }) == x);
  }
  SUBCASE("hand arithmetic") {
    Tensor y = eval1([&](Graph& g) {
      return linear(g.constant(Tensor({2}, {1, 2})), g.constant(Tensor({1, 2}, {1, 1})), g.constant(Tensor({1}, {0.5})));
    });
    CHECK(y[0] == 3.5);
  }
  SUBCASE("loop oracle") {
    Tensor x = random_tensor({6, 5}, rng), w = random_tensor({3, 5}, rng), b = random_tensor({3}, rng);
    Tensor y = eval1([&](Graph& g) { return linear(g.constant(x), g.constant(w), g.constant(b)); });
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t o = 0; o < 3; ++o) {
        double s = b[o];
        for (std::size_t d = 0; d < 5; ++d) s += w[o * 5 + d] * x[r * 5 + d];
        CHECK(std::abs(y[r * 3 + o] - s) <= 1e-12);
      }
  }
  SUBCASE("input width mismatch") {
    Graph g(false);
    CHECK_THROWS_AS(linear(g.constant(Tensor({3})), g.constant(Tensor({2, 4})), g.constant(Tensor({2}))), ShapeError);
  }
}

TEST_CASE("laplace_log_prob_box") {
  CHECK(std::abs(laplace_log_prob_box(0.0, 0.0, 1.0) - std::log(1.0 - std::exp(-0.5))) <= 1e-15);
  CHECK(laplace_log_prob_box(10.0, 0.0, 0.01) == kLogProbFloor);
  CHECK(kLogProbFloor == doctest::Approx(std::log(std::ldexp(1.0, -16))).epsilon(1e-15));
  double total = 0.0;
  for (int y = -256; y <= 255; ++y) total += laplace_box_mass(y, 0.3, 2.0);
  CHECK(std::abs(total - 1.0) <= std::ldexp(1.0, -12));

  Graph g(false);
  Var out = laplace_log_prob_box(g.constant(Tensor({2}, {0.0, 10.0})), g.constant(Tensor({2}, {0.0, 0.0})),
                                 g.constant(Tensor({2}, {1.0, 0.01})));
  CHECK(out.value()[0] == laplace_log_prob_box(0.0, 0.0, 1.0));
  CHECK(out.value()[1] == kLogProbFloor);
}

TEST_CASE("backward") {
  SUBCASE("sum gives ones") {
    Graph g;
    Var x = g.leaf(Tensor({2, 3}, 0.4), true);
    g.backward(sum(x));
    CHECK(g.grad(x) == Tensor({2, 3}, 1.0));
  }
  SUBCASE("non-scalar loss is rejected") {
    Graph g;
    Var x = g.leaf(Tensor({2}), true);
    CHECK_THROWS_AS(g.backward(x), ShapeError);
  }
  SUBCASE("repeated backward gives the same gradients") {
    Graph g;
    Var x = g.leaf(Tensor({3}, {1, 2, 3}), true);
    Var loss = sum(square(x));
    g.backward(loss);
    const Tensor first = g.grad(x);
    g.backward(loss);
    CHECK(g.grad(x) == first);
  }
  SUBCASE("counters") {
    const auto before = backward_counter();
    Graph g;
    Var x = g.leaf(Tensor({2}, 1.0), true);
    g.backward(sum(x));
    CHECK(backward_counter() == before + 1);
  }
}

TEST_CASE("gradient suite") {
  for (const auto& c : hcc::testing::run_gradient_suite()) {
    INFO(c.name << " worst " << c.result.worst);
    CHECK(c.result.checked > 0);
    CHECK(c.result.max_error <= 1e-6);
  }
}

TEST_CASE("quantization surrogates") {
  SUBCASE("ste") {
    Graph g;
    Var y = g.leaf(Tensor({1}, {1.4}), true);
    Var q = quantize_ste(y);
    CHECK(q.value()[0] == 1.0);
    g.backward(sum(q));
    CHECK(g.grad(y)[0] == 1.0);
  }
  SUBCASE("noise bound and identity gradient") {
    Rng rng(4);
    Graph g;
    Tensor x = random_tensor({1000}, rng, -3.0, 3.0);
    Var y = g.leaf(x, true);
    Var q = quantize_noise(y, rng);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(q.value()[i] >= x[i] - 0.5);
      CHECK(q.value()[i] < x[i] + 0.5);
    }
    g.backward(sum(q));
    CHECK(g.grad(y) == Tensor({1000}, 1.0));
  }
  SUBCASE("noise is zero mean") {
    Rng rng(5);
    Graph g(false);
    Var q = quantize_noise(g.constant(Tensor({1000000})), rng);
    const double m = std::accumulate(q.value().data().begin(), q.value().data().end(), 0.0) / 1e6;
    CHECK(std::abs(m) <= 0.002);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<Tensor> p = {Tensor({3}, {1, -2, 3})};
    const auto before = p;
    AdamState s;
    std::vector<Tensor> g = {Tensor({3})};
    adam_step(p, g, s);
    CHECK(p == before);
    CHECK(s.t == 1);
  }
  SUBCASE("first step moves by lr against the gradient sign") {
    std::vector<Tensor> p = {Tensor({2}, {0.0, 0.0})};
    AdamState s;
    s.config.eps = 0.0;
    adam_step(p, std::vector<Tensor>{Tensor({2}, {0.3, -7.0})}, s, 0.01);
    CHECK(p[0][0] == doctest::Approx(-0.01).epsilon(1e-12));
    CHECK(p[0][1] == doctest::Approx(0.01).epsilon(1e-12));
  }
  SUBCASE("hand-unrolled recurrence on p^2") {
    std::vector<Tensor> p = {Tensor({1}, {1.0})};
    AdamState s;
    s.config.lr = 0.1;
    double x = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
      const double grad = 2.0 * p[0][0];
      adam_step(p, std::vector<Tensor>{Tensor({1}, {grad})}, s);
      const double gx = 2.0 * x;
      m = 0.9 * m + 0.1 * gx;
      v = 0.999 * v + 0.001 * gx * gx;
      const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
      x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(std::abs(p[0][0] - x) <= 1e-12);
    }
  }
}

TEST_CASE("mac counter counts forward multiply-accumulates") {
  Graph g(false);
  const auto before = mac_counter();
  conv2d(g.constant(Tensor({3, 8, 8})), g.constant(Tensor({16, 3, 3, 3})), std::nullopt, 1, 1);
  CHECK(mac_counter() - before == 9u * 3 * 16 * 64);
}
