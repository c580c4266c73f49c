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


#include "hcc/overfit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <string>

#include "hcc/decode.hpp"
#include "hcc/metrics.hpp"
#include "hcc/optim.hpp"

namespace hcc {

std::string_view init_name(InitMode m) {
  switch (m) {
    case InitMode::kRandom: return "random";
    case InitMode::kNo: return "no";
    case InitMode::kHyper: return "hyper";
  }
  return "?";
}

std::optional<InitMode> parse_init(std::string_view name) {
  for (InitMode m : {InitMode::kRandom, InitMode::kNo, InitMode::kHyper}) {
    if (init_name(m) == name) return m;
  }
  return std::nullopt;
}

std::optional<std::size_t> parse_preset(std::string_view name) {
  if (name == "fast") return kFastSteps;
  if (name == "slow") return kSlowSteps;
  std::size_t n = 0;
  const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), n);
  if (ec != std::errc() || ptr != name.data() + name.size() || name.empty()) return std::nullopt;
  return n;
}

// ---------------------------------------------------------------------------
// Parameter quantization

std::array<std::uint8_t, kNumComponents> rd_param_search(const Tensor& image, const LatentGrids& latents,
                                                        const DecoderParams& params, double lambda) {
  const double pixels = static_cast<double>(image.dim(1) * image.dim(2));
  auto quantized = [&](const StepChoice& choice) {
    DecoderParams q = params;
    for (Component c : kAllComponents) {
      if (!choice[index_of(c)]) continue;
      const double step = quant_step(*choice[index_of(c)]);
      for (auto& t : q[c]) {
        const auto v = quantize_param_tensor(t.data(), step);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(v[i]) * step;
      }
    }
    return q;
  };
  auto key_of = [](const StepChoice& ch, Component c) { return ch[index_of(c)] ? int{*ch[index_of(c)]} : -1; };
  // Latent bits depend on the arm step only, distortion on ups and syn only.
  std::map<std::pair<int, int>, double> distortion;
  std::map<int, double> latent_bits;
  std::map<std::pair<int, int>, double> section_bits;

  const StepCost cost = [&](const StepChoice& choice) {
    const DecoderParams q = quantized(choice);
    double bits = 0.0;
    for (Component c : kAllComponents) {
      if (!choice[index_of(c)]) continue;
      const std::pair<int, int> sk{static_cast<int>(c), *choice[index_of(c)]};
      auto s = section_bits.find(sk);
      if (s == section_bits.end()) {
        const auto flat = flatten(params[c]);
        s = section_bits.emplace(sk, static_cast<double>(encode_param_section(c, *choice[index_of(c)], flat).bits))
                .first;
      }
      bits += s->second;
    }
    const std::pair<int, int> dk{key_of(choice, Component::kUps), key_of(choice, Component::kSyn)};
    auto d = distortion.find(dk);
    if (d == distortion.end()) d = distortion.emplace(dk, kDistortionScale * mse(image, decode_image(latents, q))).first;
    const int lk = key_of(choice, Component::kArm);
    auto lb = latent_bits.find(lk);
    if (lb == latent_bits.end()) lb = latent_bits.emplace(lk, latent_table_bits(latents, q[Component::kArm])).first;
    return (bits + lb->second) / pixels + lambda * d->second;
  };
  return greedy_step_search(kSearchOrder, cost);
}

Bytes write_overfitted_stream(const LatentGrids& latents, const DecoderParams& params,
                              const std::array<std::uint8_t, kNumComponents>& steps) {
  const DecoderParams q = quantize_params(params, steps);
  Bitstream s;
  s.header.mode = StreamMode::kOverfitted;
  s.header.height = static_cast<std::uint16_t>(latents.height());
  s.header.width = static_cast<std::uint16_t>(latents.width());
  s.header.num_grids = static_cast<std::uint8_t>(latents.num_grids());
  s.header.component_flags = kAllComponentsMask;
  s.sections = serialize_params(params, steps);
  s.latent_payload = encode_latents(latents, q[Component::kArm]);
  return write_bitstream(s);
}

// ---------------------------------------------------------------------------
// Optimization

namespace {

struct State {
  LatentGrids latents;
  DecoderParams params;
};

void fill_stats(EncodeResult& r, const Tensor& image, double lambda, const BaseModel* base) {
  const DecodedStream d = decode_stream(r.stream, base);
  r.recon = d.image;
  auto& s = r.stats;
  s.mode = d.stream.header.mode;
  s.bpp = bits_per_pixel(r.stream.size(), image.dim(1), image.dim(2));
  s.mse = mse(image, r.recon);
  s.psnr = psnr(image, r.recon);
  s.rd_cost = rd_cost(image, r.recon, 8.0 * static_cast<double>(r.stream.size()), lambda);
  s.mac_per_pixel = static_cast<double>(s.macs) / static_cast<double>(image.dim(1) * image.dim(2));
}

double cosine_factor(std::size_t step, std::size_t total) {
  if (total == 0) return 1.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

using CheckpointFn = std::function<void(std::size_t step, EncodeResult&&)>;

void run(const Tensor& image, double lambda, const OverfitConfig& config, const BaseModel* base, const HyperNet* h,
         std::span<const std::size_t> checkpoints, const CheckpointFn& emit) {
  if (image.rank() != 3 || image.dim(0) != kImageChannels) {
    throw ShapeError("overfit_encode: image must be [3,H,W], got " + shape_str(image.shape()));
  }
  if (image.dim(1) > 65535 || image.dim(2) > 65535) throw CodecError("image too large for the stream header");
  if (config.init != InitMode::kRandom && base == nullptr) {
    throw std::invalid_argument("overfit_encode: init=" + std::string(init_name(config.init)) + " needs a base model");
  }
  if (config.init == InitMode::kHyper && h == nullptr) {
    throw std::invalid_argument("overfit_encode: init=hyper needs a hypernetwork");
  }
  const std::size_t last = checkpoints.empty() ? 0 : *std::max_element(checkpoints.begin(), checkpoints.end());
  const std::size_t horizon = std::max(config.horizon, last);
  const auto noise_steps =
      static_cast<std::size_t>(std::floor(config.noise_fraction * static_cast<double>(horizon)));

  Rng rng(config.seed);
  std::uint64_t macs = 0;
  State state;
  std::optional<EncodeResult> init_result;  // stream at step 0 for warm starts

  std::uint64_t mac0 = mac_counter();
  switch (config.init) {
    case InitMode::kRandom: {
      const Architecture arch = base ? base->arch : config.arch;
      state.latents = init_latents(image.dim(1), image.dim(2), arch.num_grids);
      state.params = DecoderParams::initialize(arch, rng);
      break;
    }
    case InitMode::kNo: {
      state.latents = analysis(image, *base);
      state.params = base->w;
      macs += mac_counter() - mac0;
      EncodeResult r;
      r.stream = no_encode(image, *base);
      init_result = std::move(r);
      break;
    }
    case InitMode::kHyper: {
      HyperEncodeResult he = hyper_encode(image, *base, *h, lambda);
      macs += he.macs;
      state.latents = he.latents;
      state.params = he.params;
      EncodeResult r;
      r.stream = std::move(he.stream);
      r.stats.switch_used = he.decision.use;
      init_result = std::move(r);
      break;
    }
  }

  std::vector<double> losses, best_losses;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
  State best_state = state;
  bool have_best = false;

  auto encode_at = [&](std::size_t step) {
    EncodeResult r;
    if (!have_best && init_result) {
      r = *init_result;
    } else {
      const State& s = have_best ? best_state : state;
      const LatentGrids q = quantize_latents(s.latents);
      r.stats.float_psnr = psnr(image, decode_image(q, s.params));
      r.stats.quant_steps = rd_param_search(image, q, s.params, lambda);
      r.stream = write_overfitted_stream(q, s.params, r.stats.quant_steps);
    }
    r.stats.losses = losses;
    r.stats.best_losses = best_losses;
    r.stats.steps = step;
    r.stats.best_step = best_step;
    r.stats.macs = macs;
    fill_stats(r, image, lambda, base);
    if (r.stats.mode != StreamMode::kOverfitted) r.stats.float_psnr = r.stats.psnr;
    emit(step, std::move(r));
  };

  std::vector<std::size_t> pending(checkpoints.begin(), checkpoints.end());
  std::sort(pending.begin(), pending.end());
  pending.erase(std::unique(pending.begin(), pending.end()), pending.end());
  std::size_t next = 0;

  AdamState adam_latent, adam_param;
  for (std::size_t step = 0;; ++step) {
    while (next < pending.size() && pending[next] == step) encode_at(pending[next++]);
    if (step >= last) break;

    const bool noise = step < noise_steps;
    const double factor = cosine_factor(step, horizon) * (noise ? 1.0 : config.ste_lr_scale);

    mac0 = mac_counter();
    Graph g;
    std::vector<Var> latent_vars = bind_latents(g, state.latents, true);
    DecoderVars param_vars = bind_params(g, state.params, true);
    std::vector<Var> grids;
    for (const Var& v : latent_vars) grids.push_back(noise ? quantize_noise(v, rng) : quantize_ste(v));
    double loss_value = 0.0;
    try {
      RdTerms terms = rd_loss(g.constant(image), grids, param_vars, lambda);
      loss_value = terms.loss.value().item();
      if (loss_value < best) {
        best = loss_value;
        best_step = step;
        best_state = state;
        have_best = true;
      }
      losses.push_back(loss_value);
      best_losses.push_back(best);
      g.backward(terms.loss);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("overfit_encode: non-finite value at step " + std::to_string(step) + ": " + e.what());
    }
    macs += mac_counter() - mac0;

    std::vector<Tensor> latent_grads;
    for (const Var& v : latent_vars) latent_grads.push_back(g.grad(v));
    adam_step(state.latents.grids, latent_grads, adam_latent, config.lr_latent * factor);

    std::vector<Tensor> params, grads;
    for (Component c : kAllComponents) {
      for (std::size_t i = 0; i < state.params[c].size(); ++i) {
        params.push_back(state.params[c][i]);
        grads.push_back(g.grad(param_vars[c][i]));
      }
    }
    adam_step(params, grads, adam_param, config.lr_param * factor);
    std::size_t k = 0;
    for (Component c : kAllComponents)
      for (auto& t : state.params[c]) t = std::move(params[k++]);
  }
}

}  // namespace

EncodeResult overfit_encode(const Tensor& image, double lambda, const OverfitConfig& config, const BaseModel* base,
                            const HyperNet* h) {
  std::optional<EncodeResult> out;
  const std::size_t cp[] = {config.steps};
  OverfitConfig c = config;
  c.horizon = std::max(config.horizon, config.steps);
  run(image, lambda, c, base, h, cp, [&](std::size_t, EncodeResult&& r) { out = std::move(r); });
  return std::move(*out);
}

std::vector<CurvePoint> finetune_curve(const Tensor& image, double lambda, const OverfitConfig& config,
                                       std::span<const std::size_t> checkpoints, const BaseModel* base,
                                       const HyperNet* h) {
  if (checkpoints.empty()) throw std::invalid_argument("finetune_curve: no checkpoints");
  std::vector<CurvePoint> points;
  run(image, lambda, config, base, h, checkpoints, [&](std::size_t step, EncodeResult&& r) {
    CurvePoint p;
    p.steps = step;
    p.bpp = r.stats.bpp;
    p.psnr = r.stats.psnr;
    p.mac_per_pixel = r.stats.mac_per_pixel;
    p.rd_cost = r.stats.rd_cost;
    p.result = std::move(r);
    points.push_back(std::move(p));
  });
  return points;
}

}  // namespace hcc
