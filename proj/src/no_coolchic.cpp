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


#include "hcc/no_coolchic.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hcc/bitstream.hpp"
#include "hcc/optim.hpp"

namespace hcc {

namespace {

constexpr std::size_t kMetadataBytes = 1 + 8;

void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
}

}  // namespace

std::vector<Shape> analysis_head_shapes() {
  const std::size_t h = kAnalysisHidden;
  return {{h, kImageChannels, 3, 3}, {h}, {h, h, 3, 3}, {h}, {1, h, 3, 3}, {1}};
}

BaseModel BaseModel::initialize(const Architecture& arch, double lambda, Rng& rng) {
  if (arch.num_grids == 0 || arch.num_grids > kMaxGrids) throw std::invalid_argument("invalid number of grids");
  BaseModel m;
  m.arch = arch;
  m.lambda = lambda;
  for (std::size_t i = 0; i < arch.num_grids; ++i) {
    std::vector<Tensor> head;
    for (const auto& s : analysis_head_shapes()) head.emplace_back(s, 0.0);
    for (std::size_t k = 0; k < head.size(); k += 2) {
      const Shape& s = head[k].shape();
      fill_uniform(head[k], 1.0 / std::sqrt(static_cast<double>(shape_numel(s) / s[0])), rng);
    }
    m.alpha.push_back(std::move(head));
  }
  m.w = DecoderParams::initialize(arch, rng);
  return m;
}

std::vector<Tensor> BaseModel::tensors() const {
  std::vector<Tensor> out;
  for (const auto& head : alpha) out.insert(out.end(), head.begin(), head.end());
  for (Component c : kAllComponents) out.insert(out.end(), w[c].begin(), w[c].end());
  return out;
}

void BaseModel::set_tensors(std::span<const Tensor> tensors) {
  std::size_t k = 0;
  auto take = [&](Tensor& dst) {
    if (k >= tensors.size()) throw ShapeError("base model: too few tensors");
    if (tensors[k].shape() != dst.shape()) {
      throw ShapeError("base model: tensor " + std::to_string(k) + " has shape " + shape_str(tensors[k].shape()) +
                       ", expected " + shape_str(dst.shape()));
    }
    dst = tensors[k++];
  };
  for (auto& head : alpha)
    for (auto& t : head) take(t);
  for (Component c : kAllComponents)
    for (auto& t : w[c]) take(t);
  if (k != tensors.size()) throw ShapeError("base model: too many tensors");
}

Bytes encode_base_model(const BaseModel& model) {
  TensorFile f;
  f.tag = kBaseModelTag;
  f.version = kBaseModelVersion;
  ByteWriter meta;
  meta.u8(static_cast<std::uint8_t>(model.arch.num_grids));
  meta.f64(model.lambda);
  f.metadata = meta.take();
  f.tensors = model.tensors();
  return encode_tensor_file(f);
}

BaseModel decode_base_model(std::span<const std::uint8_t> bytes) {
  TensorFile f = decode_tensor_file(bytes, kBaseModelTag, kBaseModelVersion);
  if (f.metadata.size() != kMetadataBytes) throw CodecError("base model metadata has unexpected size");
  ByteReader meta(f.metadata);
  Architecture arch;
  arch.num_grids = meta.u8();
  if (arch.num_grids == 0 || arch.num_grids > kMaxGrids) throw CodecError("base model has invalid grid count");
  BaseModel m;
  m.arch = arch;
  m.lambda = meta.f64();
  for (std::size_t i = 0; i < arch.num_grids; ++i) {
    std::vector<Tensor> head;
    for (const auto& s : analysis_head_shapes()) head.emplace_back(s, 0.0);
    m.alpha.push_back(std::move(head));
  }
  m.w = DecoderParams::zeros(arch);
  try {
    m.set_tensors(f.tensors);
  } catch (const ShapeError& e) {
    throw CodecError(e.what());
  }
  return m;
}

void save_base_model(const std::filesystem::path& path, const BaseModel& model) {
  write_file(path, encode_base_model(model));
}

BaseModel load_base_model(const std::filesystem::path& path) { return decode_base_model(read_file(path)); }

ModelId model_id(const BaseModel& model) { return tensor_file_id(encode_base_model(model)); }

// ---------------------------------------------------------------------------
// Analysis

std::vector<Var> analysis_forward(Var image, std::span<const std::vector<Var>> alpha) {
  const auto& s = image.shape();
  if (s.size() != 3 || s[0] != kImageChannels) throw ShapeError("analysis: image must be [3,H,W], got " + shape_str(s));
  const auto shapes = grid_shapes(s[1], s[2], alpha.size());
  std::vector<Var> grids;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const auto& a = alpha[i];
    if (a.size() != kAnalysisTensorsPerGrid) throw ShapeError("analysis: head needs 6 tensors");
    Var x = i == 0 ? image : avg_pool(image, std::size_t{1} << i);
    Var h = relu(conv2d(x, a[0], a[1], 1, 1));
    h = relu(conv2d(h, a[2], a[3], 1, 1));
    Var y = conv2d(h, a[4], a[5], 1, 1);
    grids.push_back(reshape(y, {shapes[i].first, shapes[i].second}));
  }
  return grids;
}

std::vector<Tensor> analysis_raw(const Tensor& image, const BaseModel& model) {
  Graph g(false);
  std::vector<std::vector<Var>> alpha;
  for (const auto& head : model.alpha) {
    auto& vars = alpha.emplace_back();
    for (const auto& t : head) vars.push_back(g.constant(t));
  }
  std::vector<Tensor> out;
  for (const Var& v : analysis_forward(g.constant(image), alpha)) out.push_back(v.value());
  return out;
}

LatentGrids analysis(const Tensor& image, const BaseModel& model) {
  return quantize_latents(LatentGrids{analysis_raw(image, model)});
}

// ---------------------------------------------------------------------------
// Training

Tensor crop_patch(const Tensor& image, std::size_t y, std::size_t x, std::size_t size) {
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (y + size > h || x + size > w) throw ShapeError("crop_patch: window outside the image");
  Tensor out(Shape{image.dim(0), size, size});
  for (std::size_t c = 0; c < image.dim(0); ++c)
    for (std::size_t yy = 0; yy < size; ++yy)
      for (std::size_t xx = 0; xx < size; ++xx) out.at(c, yy, xx) = image.at(c, y + yy, x + xx);
  return out;
}

Tensor random_patch(const Tensor& image, std::size_t size, Rng& rng) {
  const std::size_t h = image.dim(1), w = image.dim(2);
  if (h <= size && w <= size) return image;
  const std::size_t s = std::min({size, h, w});
  const std::size_t y = rng.index(h - s + 1), x = rng.index(w - s + 1);
  return crop_patch(image, y, x, s);
}

namespace {

double cosine_lr(double lr, std::size_t step, std::size_t total) {
  if (total == 0) return lr;
  return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

}  // namespace

BaseTraining train_base(std::span<const Tensor> corpus, double lambda, const BaseTrainConfig& config) {
  if (corpus.empty()) throw std::invalid_argument("train_base: empty corpus");
  if (config.batch == 0) throw std::invalid_argument("train_base: batch must be positive");
  for (const auto& img : corpus) {
    if (config.patch > std::min(img.dim(1), img.dim(2))) {
      throw std::invalid_argument("train_base: patch size " + std::to_string(config.patch) +
                                  " exceeds an image of size " + std::to_string(img.dim(1)) + "x" +
                                  std::to_string(img.dim(2)));
    }
  }
  Rng rng(config.seed);
  BaseTraining out;
  out.model = BaseModel::initialize(config.arch, lambda, rng);
  std::vector<Tensor> params = out.model.tensors();
  AdamState adam;
  adam.config.lr = config.lr;

  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<Tensor> grads;
    for (const auto& p : params) grads.emplace_back(p.shape(), 0.0);
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < config.batch; ++b) {
      const Tensor& img = corpus[rng.index(corpus.size())];
      const Tensor patch = random_patch(img, config.patch, rng);

      Graph g;
      std::vector<Var> leaves;
      for (const auto& p : params) leaves.push_back(g.leaf(p, true));
      std::vector<std::vector<Var>> alpha(config.arch.num_grids);
      std::size_t k = 0;
      for (auto& head : alpha)
        for (std::size_t t = 0; t < kAnalysisTensorsPerGrid; ++t) head.push_back(leaves[k++]);
      DecoderVars dec;
      for (Component c : kAllComponents)
        for (std::size_t t = 0; t < out.model.w[c].size(); ++t) dec[c].push_back(leaves[k++]);

      auto raw = analysis_forward(g.constant(patch), alpha);
      std::vector<Var> noisy;
      for (const Var& y : raw) noisy.push_back(quantize_noise(y, rng));
      RdTerms terms = rd_loss(g.constant(patch), noisy, dec, lambda);
      Var loss = scale(terms.loss, 1.0 / static_cast<double>(config.batch));
      g.backward(loss);
      batch_loss += loss.value().item();
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        const Tensor& gr = g.grad(leaves[i]);
        if (gr.empty()) continue;
        for (std::size_t j = 0; j < gr.size(); ++j) grads[i][j] += gr[j];
      }
    }
    out.losses.push_back(batch_loss);
    adam_step(params, grads, adam, cosine_lr(config.lr, step, config.steps));
  }
  out.model.set_tensors(params);
  return out;
}

// ---------------------------------------------------------------------------
// Encoding

Bytes no_encode(const Tensor& image, const BaseModel& base) {
  if (image.rank() != 3 || image.dim(0) != kImageChannels) {
    throw ShapeError("no_encode: image must be [3,H,W], got " + shape_str(image.shape()));
  }
  if (image.dim(1) > 65535 || image.dim(2) > 65535) throw CodecError("image too large for the stream header");
  const LatentGrids latents = analysis(image, base);
  Bitstream s;
  s.header.mode = StreamMode::kNonOverfitted;
  s.header.height = static_cast<std::uint16_t>(image.dim(1));
  s.header.width = static_cast<std::uint16_t>(image.dim(2));
  s.header.num_grids = static_cast<std::uint8_t>(base.arch.num_grids);
  s.header.base_model_id = model_id(base);
  s.latent_payload = encode_latents(latents, base.w[Component::kArm]);
  return write_bitstream(s);
}

}  // namespace hcc
