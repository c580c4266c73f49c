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


#include "hcc/hypernet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>

#include "hcc/bitstream.hpp"
#include "hcc/decode.hpp"
#include "hcc/optim.hpp"

namespace hcc {

namespace {

constexpr std::size_t kStages = kBackboneChannels.size() - 1;

void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
}

std::vector<Shape> head_shapes(Component c, const Architecture& arch) {
  const std::size_t p = component_size(c, arch);
  return {{kHeadHidden, kBackboneChannels.back()}, {kHeadHidden}, {p, kHeadHidden}, {p}};
}

double cosine_lr(double lr, std::size_t step, std::size_t total) {
  if (total == 0) return lr;
  return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

}  // namespace

HyperNet HyperNet::initialize(const Architecture& arch, ComponentMask enabled, Rng& rng) {
  HyperNet h;
  h.arch = arch;
  h.enabled = enabled & kAllComponentsMask;
  for (std::size_t s = 0; s < kStages; ++s) {
    const std::size_t cin = kBackboneChannels[s], cout = kBackboneChannels[s + 1];
    Tensor w(Shape{cout, cin, 3, 3});
    fill_uniform(w, 1.0 / std::sqrt(static_cast<double>(cin * 9)), rng);
    h.backbone.push_back(std::move(w));
    h.backbone.emplace_back(Shape{cout}, 0.0);
  }
  for (Component c : kAllComponents) {
    if (!has_component(h.enabled, c)) continue;
    auto& head = h.heads[index_of(c)];
    for (const auto& s : head_shapes(c, arch)) head.emplace_back(s, 0.0);
    fill_uniform(head[0], 1.0 / std::sqrt(static_cast<double>(kBackboneChannels.back())), rng);
  }
  return h;
}

std::vector<Tensor> HyperNet::tensors() const {
  std::vector<Tensor> out = backbone;
  for (Component c : kAllComponents) {
    const auto& head = heads[index_of(c)];
    out.insert(out.end(), head.begin(), head.end());
  }
  return out;
}

void HyperNet::set_tensors(std::span<const Tensor> tensors) {
  std::size_t k = 0;
  auto take = [&](Tensor& dst) {
    if (k >= tensors.size()) throw ShapeError("hypernet: too few tensors");
    if (tensors[k].shape() != dst.shape()) {
      throw ShapeError("hypernet: tensor " + std::to_string(k) + " has shape " + shape_str(tensors[k].shape()) +
                       ", expected " + shape_str(dst.shape()));
    }
    dst = tensors[k++];
  };
  for (auto& t : backbone) take(t);
  for (auto& head : heads)
    for (auto& t : head) take(t);
  if (k != tensors.size()) throw ShapeError("hypernet: too many tensors");
}

Bytes encode_hypernet(const HyperNet& h) {
  TensorFile f;
  f.tag = kHyperNetTag;
  f.version = kHyperNetVersion;
  f.metadata = {static_cast<std::uint8_t>(h.arch.num_grids), h.enabled};
  f.tensors = h.tensors();
  return encode_tensor_file(f);
}

HyperNet decode_hypernet(std::span<const std::uint8_t> bytes) {
  TensorFile f = decode_tensor_file(bytes, kHyperNetTag, kHyperNetVersion);
  if (f.metadata.size() != 2) throw CodecError("hypernetwork metadata has unexpected size");
  Architecture arch{f.metadata[0]};
  if (arch.num_grids == 0 || arch.num_grids > kMaxGrids) throw CodecError("hypernetwork has invalid grid count");
  if ((f.metadata[1] & ~kAllComponentsMask) != 0) throw CodecError("hypernetwork has unknown component bits");
  Rng unused(0);
  HyperNet h = HyperNet::initialize(arch, f.metadata[1], unused);
  try {
    h.set_tensors(f.tensors);
  } catch (const ShapeError& e) {
    throw CodecError(e.what());
  }
  return h;
}

void save_hypernet(const std::filesystem::path& path, const HyperNet& h) { write_file(path, encode_hypernet(h)); }

HyperNet load_hypernet(const std::filesystem::path& path) { return decode_hypernet(read_file(path)); }

// ---------------------------------------------------------------------------
// Forward

HyperNetVars bind_hypernet(Graph& g, const HyperNet& h, bool requires_grad) {
  HyperNetVars v;
  for (const auto& t : h.backbone) v.backbone.push_back(g.leaf(t, requires_grad));
  for (Component c : kAllComponents) {
    for (const auto& t : h.heads[index_of(c)]) v.heads[index_of(c)].push_back(g.leaf(t, requires_grad));
  }
  return v;
}

Var hypernet_features(Var image, std::span<const Var> backbone) {
  if (backbone.size() != 2 * kStages) throw ShapeError("hypernet: backbone needs 8 tensors");
  Var x = add_scalar(image, -0.5);
  for (std::size_t s = 0; s < kStages; ++s) x = relu(conv2d(x, backbone[2 * s], backbone[2 * s + 1], 2, 1));
  return global_mean_pool(x);
}

std::array<Var, kNumComponents> hypernet_forward(Var image, const HyperNetVars& vars, ComponentMask enabled) {
  std::array<Var, kNumComponents> out;
  if ((enabled & kAllComponentsMask) == 0) return out;
  Var f = hypernet_features(image, vars.backbone);
  for (Component c : kAllComponents) {
    if (!has_component(enabled, c)) continue;
    const auto& head = vars.heads[index_of(c)];
    if (head.size() != 4) throw ShapeError("hypernet: head for " + std::string(component_name(c)) + " is missing");
    Var h = relu(linear(f, head[0], head[1]));
    out[index_of(c)] = linear(h, head[2], head[3]);
  }
  return out;
}

Modulation predict_modulations(const Tensor& image, const HyperNet& h) {
  Graph g(false);
  const auto vars = bind_hypernet(g, h, false);
  const auto deltas = hypernet_forward(g.constant(image), vars, h.enabled);
  Modulation m;
  for (Component c : kAllComponents) {
    if (deltas[index_of(c)].valid()) m.deltas[index_of(c)] = deltas[index_of(c)].value().vec();
  }
  return m;
}

DecoderVars modulated_decoder(Graph& g, const DecoderParams& base, std::span<const Var, kNumComponents> deltas) {
  DecoderVars out;
  for (Component c : kAllComponents) {
    const Var d = deltas[index_of(c)];
    std::size_t off = 0;
    for (const auto& t : base[c]) {
      Var w = g.constant(t);
      if (d.valid()) {
        w = add(w, reshape(slice(d, off, {t.size()}), t.shape()));
        off += t.size();
      }
      out[c].push_back(w);
    }
    if (d.valid() && off != d.value().size()) {
      throw ShapeError("modulation for " + std::string(component_name(c)) + " has " +
                       std::to_string(d.value().size()) + " values, expected " + std::to_string(off));
    }
  }
  return out;
}

HyperTraining train_hypernet(std::span<const Tensor> corpus, const BaseModel& base, double lambda,
                             const HyperTrainConfig& config) {
  if (corpus.empty()) throw std::invalid_argument("train_hypernet: empty corpus");
  if (config.batch == 0) throw std::invalid_argument("train_hypernet: batch must be positive");
  for (const auto& img : corpus) {
    if (config.patch > std::min(img.dim(1), img.dim(2))) {
      throw std::invalid_argument("train_hypernet: patch size " + std::to_string(config.patch) +
                                  " exceeds an image of size " + std::to_string(img.dim(1)) + "x" +
                                  std::to_string(img.dim(2)));
    }
  }
  Rng rng(config.seed);
  HyperTraining out;
  out.net = HyperNet::initialize(base.arch, config.components, rng);
  std::vector<Tensor> params = out.net.tensors();
  AdamState adam;
  adam.config.lr = config.lr;

  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<Tensor> grads;
    for (const auto& p : params) grads.emplace_back(p.shape(), 0.0);
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < config.batch; ++b) {
      const Tensor& img = corpus[rng.index(corpus.size())];
      const Tensor patch = random_patch(img, config.patch, rng);
      const LatentGrids latents = analysis(patch, base);

      Graph g;
      HyperNet current = out.net;
      current.set_tensors(params);
      const auto vars = bind_hypernet(g, current, true);
      const Var x = g.constant(patch);
      const auto deltas = hypernet_forward(x, vars, current.enabled);
      const DecoderVars dec = modulated_decoder(g, base.w, deltas);
      std::vector<Var> grids;
      for (const auto& t : latents.grids) grids.push_back(g.constant(t));
      Var loss = scale(rd_loss(x, grids, dec, lambda).loss, 1.0 / static_cast<double>(config.batch));
      batch_loss += loss.value().item();
      if (!loss.requires_grad()) continue;
      g.backward(loss);

      std::vector<Var> leaves = vars.backbone;
      for (const auto& head : vars.heads) leaves.insert(leaves.end(), head.begin(), head.end());
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        const Tensor& gr = g.grad(leaves[i]);
        if (gr.empty()) continue;
        for (std::size_t j = 0; j < gr.size(); ++j) grads[i][j] += gr[j];
      }
    }
    out.losses.push_back(batch_loss);
    adam_step(params, grads, adam, cosine_lr(config.lr, step, config.steps));
  }
  out.net.set_tensors(params);
  return out;
}

// ---------------------------------------------------------------------------
// Step search and switch

std::array<std::uint8_t, kNumComponents> greedy_step_search(std::span<const Component> order, const StepCost& cost) {
  StepChoice choice{};
  for (Component c : order) {
    double best = std::numeric_limits<double>::infinity();
    std::uint8_t best_index = 0;
    for (std::uint8_t idx = 0; idx < kNumStepIndices; ++idx) {
      choice[index_of(c)] = idx;
      const double v = cost(choice);
      if (v < best) {
        best = v;
        best_index = idx;
      }
    }
    choice[index_of(c)] = best_index;
  }
  std::array<std::uint8_t, kNumComponents> out{};
  for (Component c : kAllComponents) out[index_of(c)] = choice[index_of(c)].value_or(0);
  return out;
}

Modulation quantize_modulation(const Modulation& delta) {
  Modulation q = delta;
  for (Component c : kAllComponents) {
    if (!q.has(c)) continue;
    const double step = quant_step(q.step_index[index_of(c)]);
    q[c] = dequantize_param_tensor(quantize_param_tensor(delta[c], step), step);
  }
  return q;
}

namespace {

// Modulation with the chosen components quantized; unset components keep
// their real-valued deltas.
Modulation partially_quantized(const Modulation& delta, const StepChoice& choice) {
  Modulation m = delta;
  for (Component c : kAllComponents) {
    if (!m.has(c) || !choice[index_of(c)]) continue;
    m.step_index[index_of(c)] = *choice[index_of(c)];
    const double step = quant_step(*choice[index_of(c)]);
    m[c] = dequantize_param_tensor(quantize_param_tensor(delta[c], step), step);
  }
  return m;
}

}  // namespace

Modulation search_modulation_steps(const Tensor& image, const LatentGrids& latents, const BaseModel& base,
                                   const Modulation& delta, double lambda) {
  std::vector<Component> order;
  for (Component c : kSearchOrder)
    if (delta.has(c)) order.push_back(c);
  if (order.empty()) return delta;

  const double pixels = static_cast<double>(image.dim(1) * image.dim(2));
  // The arm delta only moves latent bits; ups and syn deltas only move the
  // reconstruction. Both are cached on the choices they depend on.
  using Key = std::pair<int, int>;
  std::map<Key, double> distortion;
  std::map<int, double> latent_bits;
  auto key_of = [](const StepChoice& ch, Component c) { return ch[index_of(c)] ? int{*ch[index_of(c)]} : -1; };

  const StepCost cost = [&](const StepChoice& choice) {
    const Modulation m = partially_quantized(delta, choice);
    double bits = 0.0;
    for (Component c : order) {
      if (!choice[index_of(c)]) continue;
      bits += static_cast<double>(encode_param_section(c, *choice[index_of(c)], m[c]).bits);
    }
    const DecoderParams we = apply_modulations(base.w, m);
    const Key dk{key_of(choice, Component::kUps), key_of(choice, Component::kSyn)};
    auto d = distortion.find(dk);
    if (d == distortion.end()) {
      d = distortion.emplace(dk, kDistortionScale * mse(image, decode_image(latents, we))).first;
    }
    const int lk = key_of(choice, Component::kArm);
    auto lb = latent_bits.find(lk);
    if (lb == latent_bits.end()) {
      lb = latent_bits.emplace(lk, latent_table_bits(latents, we[Component::kArm])).first;
    }
    return (bits + lb->second) / pixels + lambda * d->second;
  };
  const auto steps = greedy_step_search(order, cost);
  Modulation out = delta;
  for (Component c : order) out.step_index[index_of(c)] = steps[index_of(c)];
  return quantize_modulation(out);
}

namespace {

Bitstream base_stream(const Tensor& image, const LatentGrids& latents, const BaseModel& base,
                      const DecoderParams& decoder) {
  Bitstream s;
  s.header.mode = StreamMode::kNonOverfitted;
  s.header.height = static_cast<std::uint16_t>(image.dim(1));
  s.header.width = static_cast<std::uint16_t>(image.dim(2));
  s.header.num_grids = static_cast<std::uint8_t>(base.arch.num_grids);
  s.header.base_model_id = model_id(base);
  s.latent_payload = encode_latents(latents, decoder[Component::kArm]);
  return s;
}

}  // namespace

Bytes write_hyper_stream(const Tensor& image, const LatentGrids& latents, const BaseModel& base,
                         const Modulation& quantized) {
  const DecoderParams we = apply_modulations(base.w, quantized);
  Bitstream s = base_stream(image, latents, base, we);
  s.header.mode = StreamMode::kHyper;
  s.header.component_flags = quantized.present();
  s.sections = serialize_modulation(quantized).sections;
  return write_bitstream(s);
}

SwitchDecision modulation_switch(const Tensor& image, const LatentGrids& latents, const BaseModel& base,
                                 const Modulation& quantized, double lambda) {
  SwitchDecision d;
  const Bytes without = write_bitstream(base_stream(image, latents, base, base.w));
  d.cost_without = rd_cost(image, decode_image(latents, base.w), 8.0 * static_cast<double>(without.size()), lambda);
  if (quantized.present() == 0) {
    d.cost_with = d.cost_without;
    return d;
  }
  const Bytes with = write_hyper_stream(image, latents, base, quantized);
  d.cost_with = rd_cost(image, decode_image(latents, apply_modulations(base.w, quantized)),
                        8.0 * static_cast<double>(with.size()), lambda);
  d.use = d.cost_with < d.cost_without;
  return d;
}

SwitchDecision modulation_switch(const Tensor& image, const BaseModel& base, const Modulation& quantized,
                                 double lambda) {
  return modulation_switch(image, analysis(image, base), base, quantized, lambda);
}

HyperEncodeResult hyper_encode(const Tensor& image, const BaseModel& base, const HyperNet& h, double lambda,
                               const HyperEncodeOptions& options) {
  if (h.arch != base.arch) throw std::invalid_argument("hypernetwork and base model disagree on the grid count");
  HyperEncodeResult r;
  const std::uint64_t mac0 = mac_counter();
  r.latents = analysis(image, base);
  HyperNet used = h;
  used.enabled = h.enabled & options.components;
  const Modulation predicted = predict_modulations(image, used);
  r.macs = mac_counter() - mac0;

  r.modulation = search_modulation_steps(image, r.latents, base, predicted, lambda);
  r.decision = modulation_switch(image, r.latents, base, r.modulation, lambda);
  if (r.decision.use) {
    r.params = apply_modulations(base.w, r.modulation);
    r.stream = write_hyper_stream(image, r.latents, base, r.modulation);
  } else {
    r.params = base.w;
    r.stream = write_bitstream(base_stream(image, r.latents, base, base.w));
  }
  r.recon = decode_image(r.latents, r.params);
  return r;
}

LaplaceFit fit_laplace_std(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("fit_laplace_std: no values");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t n = v.size(), mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double median = v[mid];
  if (n % 2 == 0) median = 0.5 * (median + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  double s = 0.0;
  for (double x : values) s += std::abs(x - median);
  LaplaceFit fit;
  fit.location = median;
  fit.b = s / static_cast<double>(n);
  fit.std = std::numbers::sqrt2 * fit.b;
  return fit;
}

}  // namespace hcc
