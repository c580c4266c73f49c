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


#include "hcc/decode.hpp"

#include "hcc/entropy.hpp"

namespace hcc {

DecodedStream decode_stream(std::span<const std::uint8_t> bytes, const BaseModel* base) {
  DecodedStream out;
  out.stream = read_bitstream(bytes);
  const Header& h = out.stream.header;
  const Architecture arch{h.num_grids};

  if (h.mode == StreamMode::kOverfitted) {
    out.params = deserialize_params(out.stream.sections, arch);
  } else {
    if (base == nullptr) throw CodecError("this stream needs its base model (mode " + std::to_string(static_cast<int>(h.mode)) + ")");
    if (model_id(*base) != h.base_model_id) {
      throw CodecError("base model mismatch: stream expects " + hex(h.base_model_id) + ", got " +
                       hex(model_id(*base)));
    }
    if (base->arch != arch) throw CodecError("stream grid count does not match the base model");
    out.params = base->w;
    if (h.mode == StreamMode::kHyper) {
      out.params = apply_modulations(base->w, deserialize_modulation(out.stream.sections, arch));
    }
  }
  out.latents = decode_latents(out.stream.latent_payload, h.height, h.width, h.num_grids,
                               out.params[Component::kArm]);
  out.image = decode_image(out.latents, out.params);
  return out;
}

Tensor decode_bitstream(std::span<const std::uint8_t> bytes, const BaseModel* base) {
  return decode_stream(bytes, base).image;
}

double rd_cost(const Tensor& image, const Tensor& recon, double bits, double lambda) {
  const double pixels = static_cast<double>(image.dim(1) * image.dim(2));
  return bits / pixels + lambda * kDistortionScale * mse(image, recon);
}

double stream_rd_cost(const Tensor& image, std::span<const std::uint8_t> bytes, const BaseModel* base, double lambda) {
  const Tensor recon = decode_bitstream(bytes, base);
  return rd_cost(image, recon, 8.0 * static_cast<double>(bytes.size()), lambda);
}

double bits_per_pixel(std::size_t stream_bytes, std::size_t height, std::size_t width) {
  return 8.0 * static_cast<double>(stream_bytes) / static_cast<double>(height * width);
}

}  // namespace hcc
