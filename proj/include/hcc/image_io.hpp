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

// Images are [3,H,W] tensors with values in [0,1].

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "hcc/tensor.hpp"

namespace hcc {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary PPM (P6, maxval 255).
Tensor read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Tensor& image);

bool png_supported();
Tensor read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Tensor& image);

/// Dispatches on the extension: .ppm, .png.
Tensor read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Tensor& image);
bool is_image_path(const std::filesystem::path& path);
/// Image files of a directory, sorted by file name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Interleaved RGB bytes, each value round(255 * clamp(v, 0, 1)).
std::vector<std::uint8_t> to_rgb8(const Tensor& image);
Tensor from_rgb8(std::span<const std::uint8_t> rgb, std::size_t height, std::size_t width);
/// Image after the 8-bit round trip.
Tensor round_to_8bit(const Tensor& image);
/// FNV-1a 64 of the interleaved 8-bit pixels.
std::uint64_t image_hash(const Tensor& image);

void check_image(const Tensor& image);

/// Procedural test content: smooth color gradients, a few flat rectangles
/// and disks, and mild texture. Fully determined by the seed.
Tensor synthetic_image(std::size_t height, std::size_t width, std::uint64_t seed);
/// Single-color image.
Tensor constant_image(std::size_t height, std::size_t width, double r, double g, double b);

}  // namespace hcc
