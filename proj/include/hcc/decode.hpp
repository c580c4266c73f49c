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


// Decoding of .hcc streams of every mode, and the RD cost of a stream.

#pragma once

#include <span>

#include "hcc/bitstream.hpp"
#include "hcc/no_coolchic.hpp"

namespace hcc {

struct DecodedStream {
  Bitstream stream;
  LatentGrids latents;
  DecoderParams params;  // the decoder that produced `image`
  Tensor image;
};

/// `base` may be null for mode 2 streams. Modes 0 and 1 require the base
/// model whose id the header references.
DecodedStream decode_stream(std::span<const std::uint8_t> bytes, const BaseModel* base);
Tensor decode_bitstream(std::span<const std::uint8_t> bytes, const BaseModel* base);

/// bits / (H*W) + lambda * 255^2 * MSE.
double rd_cost(const Tensor& image, const Tensor& recon, double bits, double lambda);
/// RD cost of a stream measured by decoding it: file bits over pixels plus
/// weighted distortion.
double stream_rd_cost(const Tensor& image, std::span<const std::uint8_t> bytes, const BaseModel* base, double lambda);

/// Bits per pixel of a stream of the given size.
double bits_per_pixel(std::size_t stream_bytes, std::size_t height, std::size_t width);

}  // namespace hcc
