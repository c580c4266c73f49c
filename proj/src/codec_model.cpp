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

#include "hcc/codec_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hcc {

namespace {

// Log-scale output of the ARM is clamped before exp to keep b finite.
constexpr double kArmLogScaleMin = -30.0;
constexpr double kArmLogScaleMax = 30.0;

void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
}

}  // namespace

std::string_view component_name(Component c) {
  switch (c) {
    case Component::kUps:
      return "ups";
    case Component::kSyn:
      return "syn";
    case Component::kArm:
      return "arm";
  }
  return "?";
}

std::optional<Component> parse_component(std::string_view name) {
  for (Component c : kAllComponents) {
    if (component_name(c) == name) return c;
  }
  return std::nullopt;
}

ComponentMask parse_component_list(std::string_view list) {
  ComponentMask mask = 0;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t end = std::min(list.find(',', start), list.size());
    const std::string_view item = list.substr(start, end - start);
    if (!item.empty()) {
      auto c = parse_component(item);
      if (!c) throw std::invalid_argument("unknown component '" + std::string(item) + "' (expected ups, syn, arm)");
      mask |= mask_of(*c);
    }
    start = end + 1;
  }
  return mask;
}

std::vector<Shape> component_shapes(Component c, const Architecture& arch) {
  switch (c) {
    case Component::kUps:
      return {{1, 1, 4, 4}};
    case Component::kSyn:
      return {{kSynHidden, arch.num_grids, 1, 1}, {kSynHidden}, {kSynHidden, kSynHidden, 1, 1}, {kSynHidden},
              {kImageChannels, kSynHidden, 3, 3},  {kImageChannels}};
    case Component::kArm:
      return {{kArmHidden, static_cast<std::size_t>(kContextSize)}, {kArmHidden}, {kArmHidden, kArmHidden},
              {kArmHidden}, {2, kArmHidden}, {2}};
  }
  return {};
}

std::size_t component_size(Component c, const Architecture& arch) {
  std::size_t n = 0;
  for (const auto& s : component_shapes(c, arch)) n += shape_numel(s);
  return n;
}

std::vector<double> flatten(std::span<const Tensor> tensors) {
  std::vector<double> out;
  for (const auto& t : tensors) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

std::vector<Tensor> unflatten(std::span<const double> values, std::span<const Shape> shapes) {
  std::vector<Tensor> out;
  std::size_t off = 0;
  for (const auto& s : shapes) {
    const std::size_t n = shape_numel(s);
    if (off + n > values.size()) throw ShapeError("unflatten: not enough values for " + shape_str(s));
    out.emplace_back(s, std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(off),
                                            values.begin() + static_cast<std::ptrdiff_t>(off + n)));
    off += n;
  }
  if (off != values.size()) {
    throw ShapeError("unflatten: " + std::to_string(values.size()) + " values for " + std::to_string(off) + " slots");
  }
  return out;
}

Tensor bilinear_kernel() {
  constexpr double taps[4] = {0.25, 0.75, 0.75, 0.25};
  Tensor k(Shape{1, 1, 4, 4});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) k[static_cast<std::size_t>(y * 4 + x)] = taps[y] * taps[x];
  return k;
}

std::size_t DecoderParams::num_grids() const {
  const auto& syn = (*this)[Component::kSyn];
  if (syn.empty()) throw ShapeError("decoder parameters have no synthesis layers");
  return syn[0].dim(1);
}

DecoderParams DecoderParams::zeros(const Architecture& arch) {
  DecoderParams p;
  for (Component c : kAllComponents) {
    for (const auto& s : component_shapes(c, arch)) p[c].emplace_back(s, 0.0);
  }
  return p;
}

DecoderParams DecoderParams::initialize(const Architecture& arch, Rng& rng) {
  DecoderParams p = zeros(arch);
  p[Component::kUps][0] = bilinear_kernel();
  for (Component c : {Component::kSyn, Component::kArm}) {
    auto& ts = p[c];
    for (std::size_t i = 0; i < ts.size(); i += 2) {
      const Shape& s = ts[i].shape();
      const std::size_t fan_in = shape_numel(s) / s[0];
      fill_uniform(ts[i], 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
    }
  }
  p[Component::kSyn][5].fill(0.5);
  return p;
}

ComponentMask Modulation::present() const {
  ComponentMask m = 0;
  for (Component c : kAllComponents) {
    if (has(c)) m |= mask_of(c);
  }
  return m;
}

DecoderParams apply_modulations(const DecoderParams& base, const Modulation& delta) {
  DecoderParams out = base;
  for (Component c : kAllComponents) {
    if (!delta.has(c)) continue;
    const auto& d = delta[c];
    auto& ts = out[c];
    std::size_t off = 0;
    for (auto& t : ts) {
      if (off + t.size() > d.size()) break;
      for (std::size_t i = 0; i < t.size(); ++i) t[i] += d[off + i];
      off += t.size();
    }
    if (off != d.size()) {
      throw ShapeError("modulation for " + std::string(component_name(c)) + " has " + std::to_string(d.size()) +
                       " values, component has " + std::to_string(off));
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> grid_shapes(std::size_t height, std::size_t width,
                                                             std::size_t num_grids) {
  if (height == 0 || width == 0) throw std::invalid_argument("image dimensions must be positive");
  if (num_grids == 0 || num_grids > kMaxGrids) {
    throw std::invalid_argument("number of latent grids must be in [1, 8], got " + std::to_string(num_grids));
  }
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  std::size_t h = height, w = width;
  for (std::size_t i = 0; i < num_grids; ++i) {
    shapes.emplace_back(h, w);
    h = (h + 1) / 2;
    w = (w + 1) / 2;
  }
  return shapes;
}

std::size_t LatentGrids::num_symbols() const {
  std::size_t n = 0;
  for (const auto& g : grids) n += g.size();
  return n;
}

LatentGrids init_latents(std::size_t height, std::size_t width, std::size_t num_grids) {
  LatentGrids out;
  for (auto [h, w] : grid_shapes(height, width, num_grids)) out.grids.emplace_back(Shape{h, w}, 0.0);
  return out;
}

LatentGrids quantize_latents(const LatentGrids& latents) {
  LatentGrids out = latents;
  for (auto& g : out.grids) {
    for (auto& v : g.data()) v = std::clamp(std::round(v), double{kLatentMin}, double{kLatentMax});
  }
  return out;
}

void check_schedule(const LatentGrids& latents) {
  if (latents.grids.empty()) throw ShapeError("latent grids are empty");
  const auto expected = grid_shapes(latents.height(), latents.width(), latents.num_grids());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& g = latents.grids[i];
    if (g.rank() != 2 || g.dim(0) != expected[i].first || g.dim(1) != expected[i].second) {
      throw ShapeError("latent grid " + std::to_string(i) + " has shape " + shape_str(g.shape()) +
                       ", schedule expects [" + std::to_string(expected[i].first) + "," +
                       std::to_string(expected[i].second) + "]");
    }
  }
}

// ---------------------------------------------------------------------------
// Graph entry points

DecoderVars bind_params(Graph& g, const DecoderParams& params, bool requires_grad) {
  DecoderVars v;
  for (Component c : kAllComponents) {
    for (const auto& t : params[c]) v[c].push_back(g.leaf(t, requires_grad));
  }
  return v;
}

std::vector<Var> bind_latents(Graph& g, const LatentGrids& latents, bool requires_grad) {
  std::vector<Var> out;
  for (const auto& t : latents.grids) out.push_back(g.leaf(t, requires_grad));
  return out;
}

Var upsample_all(std::span<const Var> grids, Var ups_kernel, std::size_t height, std::size_t width) {
  const auto shapes = grid_shapes(height, width, grids.size());
  std::vector<Var> channels;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const auto& s = grids[i].shape();
    if (s.size() != 2 || s[0] != shapes[i].first || s[1] != shapes[i].second) {
      throw ShapeError("upsample_all: grid " + std::to_string(i) + " has shape " + shape_str(s));
    }
    Var x = reshape(grids[i], {1, s[0], s[1]});
    for (std::size_t j = i; j > 0; --j) {
      x = transposed_conv2d(x, ups_kernel, EdgeMode::kReplicate);
      x = crop(x, shapes[j - 1].first, shapes[j - 1].second);
    }
    if (x.shape() != Shape{1, height, width}) {
      throw std::logic_error("upsample_all: grid " + std::to_string(i) + " ended at " + shape_str(x.shape()));
    }
    channels.push_back(reshape(x, {height, width}));
  }
  return stack(channels);
}

Var synthesize(Var features, std::span<const Var> syn) {
  if (syn.size() != 6) throw ShapeError("synthesize: expected 6 parameter tensors");
  if (features.shape().size() != 3 || features.shape()[0] != syn[0].shape()[1]) {
    throw ShapeError("synthesize: features " + shape_str(features.shape()) + " for a synthesis expecting " +
                     std::to_string(syn[0].shape()[1]) + " channels");
  }
  Var h = relu(conv2d(features, syn[0], syn[1], 1, 0));
  h = relu(conv2d(h, syn[2], syn[3], 1, 0));
  Var out = conv2d(h, syn[4], syn[5], 1, 1);
  return clamp(out, 0.0, 1.0);
}

std::pair<Var, Var> arm_forward(Var grid, std::span<const Var> arm) {
  if (arm.size() != 6) throw ShapeError("arm_forward: expected 6 parameter tensors");
  Var ctx = gather_context(grid);
  Var h = relu(linear(ctx, arm[0], arm[1]));
  h = relu(linear(h, arm[2], arm[3]));
  Var out = linear(h, arm[4], arm[5]);
  Var mu = column(out, 0);
  Var b = add_scalar(exp(clamp(column(out, 1), kArmLogScaleMin, kArmLogScaleMax)), kArmScaleFloor);
  return {mu, b};
}

Var latent_rate_bits(std::span<const Var> grids, std::span<const Var> arm) {
  if (grids.empty()) throw ShapeError("latent_rate_bits: no grids");
  std::optional<Var> total;
  for (const Var& grid : grids) {
    auto [mu, b] = arm_forward(grid, arm);
    Var symbols = reshape(grid, {grid.value().size()});
    Var bits = scale(sum(laplace_log_prob_box(symbols, mu, b)), -1.0 / std::numbers::ln2);
    total = total ? add(*total, bits) : bits;
  }
  return *total;
}

Var decode_image(std::span<const Var> grids, const DecoderVars& params) {
  if (grids.empty()) throw ShapeError("decode_image: no grids");
  const auto& s = grids[0].shape();
  return synthesize(upsample_all(grids, params[Component::kUps].at(0), s.at(0), s.at(1)), params[Component::kSyn]);
}

RdTerms rd_loss(Var image, std::span<const Var> grids, const DecoderVars& params, double lambda) {
  Var recon = decode_image(grids, params);
  if (image.shape() != recon.shape()) {
    throw ShapeError("rd_loss: image " + shape_str(image.shape()) + " vs reconstruction " + shape_str(recon.shape()));
  }
  Var bits = latent_rate_bits(grids, params[Component::kArm]);
  Var dist = mse(recon, image);
  const double pixels = static_cast<double>(image.shape()[1] * image.shape()[2]);
  Var loss = add(scale(bits, 1.0 / pixels), scale(dist, lambda * kDistortionScale));
  return {loss, bits, dist};
}

// ---------------------------------------------------------------------------
// Plain-tensor entry points

namespace {

std::vector<Var> constants(Graph& g, std::span<const Tensor> ts) {
  std::vector<Var> out;
  for (const auto& t : ts) out.push_back(g.constant(t));
  return out;
}

}  // namespace

Tensor upsample_all(const LatentGrids& latents, const Tensor& ups_kernel) {
  Graph g(false);
  auto grids = constants(g, latents.grids);
  return upsample_all(grids, g.constant(ups_kernel), latents.height(), latents.width()).value();
}

Tensor synthesize(const Tensor& features, std::span<const Tensor> syn) {
  Graph g(false);
  auto params = constants(g, syn);
  return synthesize(g.constant(features), params).value();
}

ArmOutput arm_forward(const Tensor& grid, std::span<const Tensor> arm) {
  Graph g(false);
  auto params = constants(g, arm);
  auto [mu, b] = arm_forward(g.constant(grid), params);
  return {mu.value(), b.value()};
}

double latent_rate_bits(const LatentGrids& latents, std::span<const Tensor> arm) {
  Graph g(false);
  auto grids = constants(g, latents.grids);
  auto params = constants(g, arm);
  return latent_rate_bits(grids, params).value().item();
}

Tensor decode_image(const LatentGrids& latents, const DecoderParams& params) {
  check_schedule(latents);
  Graph g(false);
  auto grids = constants(g, latents.grids);
  return decode_image(grids, bind_params(g, params, false)).value();
}

double rd_loss(const Tensor& image, const LatentGrids& latents, const DecoderParams& params, double lambda) {
  Graph g(false);
  auto grids = constants(g, latents.grids);
  return rd_loss(g.constant(image), grids, bind_params(g, params, false), lambda).loss.value().item();
}

ArmPrediction arm_predict(std::span<const double, kContextSize> context, std::span<const Tensor> arm) {
  if (arm.size() != 6) throw ShapeError("arm_predict: expected 6 parameter tensors");
  std::array<double, kArmHidden> h1{}, h2{};
  auto layer = [](const Tensor& w, const Tensor& b, const double* in, std::size_t din, double* out) {
    const std::size_t dout = w.dim(0);
    for (std::size_t o = 0; o < dout; ++o) {
      double s = b[o];
      for (std::size_t d = 0; d < din; ++d) s += w[o * din + d] * in[d];
      out[o] = s;
    }
  };
  layer(arm[0], arm[1], context.data(), kContextSize, h1.data());
  for (auto& v : h1) v = v > 0.0 ? v : 0.0;
  layer(arm[2], arm[3], h1.data(), kArmHidden, h2.data());
  for (auto& v : h2) v = v > 0.0 ? v : 0.0;
  double out[2];
  layer(arm[4], arm[5], h2.data(), kArmHidden, out);
  const double b = std::exp(std::clamp(out[1], kArmLogScaleMin, kArmLogScaleMax)) + kArmScaleFloor;
  if (!std::isfinite(out[0]) || !std::isfinite(b)) throw NonFiniteError("non-finite value produced by arm_predict");
  return {out[0], b};
}

std::array<double, kContextSize> context_at(const Tensor& grid, std::size_t y, std::size_t x) {
  std::array<double, kContextSize> ctx{};
  const auto h = static_cast<std::ptrdiff_t>(grid.dim(0)), w = static_cast<std::ptrdiff_t>(grid.dim(1));
  for (int c = 0; c < kContextSize; ++c) {
    const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + kContextOffsets[c][0];
    const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + kContextOffsets[c][1];
    ctx[static_cast<std::size_t>(c)] =
        (yy >= 0 && yy < h && xx >= 0 && xx < w) ? grid[static_cast<std::size_t>(yy * w + xx)] : 0.0;
  }
  return ctx;
}

double mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("mse: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s * (1.0 / static_cast<double>(a.size()));
}

}  // namespace hcc
