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


#include "hcc/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <string>

#include "hcc/bytes.hpp"

#ifdef HCC_WITH_PNG
#include <png.h>
#endif

namespace hcc {

namespace fs = std::filesystem;

void check_image(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) == 0 || image.dim(2) == 0) {
    throw ImageError("expected a [3,H,W] image, got " + shape_str(image.shape()));
  }
}

std::vector<std::uint8_t> to_rgb8(const Tensor& image) {
  check_image(image);
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> out(3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
        out[(y * w + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return out;
}

Tensor from_rgb8(std::span<const std::uint8_t> rgb, std::size_t height, std::size_t width) {
  if (rgb.size() != 3 * height * width) throw ImageError("pixel buffer size does not match dimensions");
  Tensor img(Shape{3, height, width});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = rgb[(y * width + x) * 3 + c] / 255.0;
    }
  }
  return img;
}

Tensor round_to_8bit(const Tensor& image) { return from_rgb8(to_rgb8(image), image.dim(1), image.dim(2)); }

std::uint64_t image_hash(const Tensor& image) { return fnv1a64(to_rgb8(image)); }

// ---------------------------------------------------------------------------
// PPM

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

std::size_t ppm_number(std::istream& in, const fs::path& path) {
  const std::string tok = ppm_token(in);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
      tok.size() > 9) {
    throw ImageError(path.string() + ": malformed PPM header");
  }
  return std::stoul(tok);
}

}  // namespace

Tensor read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  if (ppm_token(in) != "P6") throw ImageError(path.string() + ": not a binary PPM (P6) file");
  const std::size_t w = ppm_number(in, path);
  const std::size_t h = ppm_number(in, path);
  const std::size_t maxval = ppm_number(in, path);
  if (maxval != 255) throw ImageError(path.string() + ": only maxval 255 is supported, got " + std::to_string(maxval));
  if (w == 0 || h == 0 || w > 65535 || h > 65535) throw ImageError(path.string() + ": unsupported dimensions");
  std::vector<std::uint8_t> rgb(3 * w * h);
  in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (static_cast<std::size_t>(in.gcount()) != rgb.size()) throw ImageError(path.string() + ": truncated pixel data");
  return from_rgb8(rgb, h, w);
}

void write_ppm(const fs::path& path, const Tensor& image) {
  const auto rgb = to_rgb8(image);
  const std::string header =
      "P6\n" + std::to_string(image.dim(2)) + " " + std::to_string(image.dim(1)) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), rgb.begin(), rgb.end());
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// PNG

#ifdef HCC_WITH_PNG

bool png_supported() { return true; }

Tensor read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw ImageError(path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ImageError(path.string() + ": " + img.message);
  }
  return from_rgb8(rgb, img.height, img.width);
}

void write_png(const fs::path& path, const Tensor& image) {
  const auto rgb = to_rgb8(image);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.dim(2));
  img.height = static_cast<png_uint_32>(image.dim(1));
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, rgb.data(), 0, nullptr)) {
    throw ImageError(path.string() + ": " + img.message);
  }
}

#else

bool png_supported() { return false; }

Tensor read_png(const fs::path& path) {
  throw ImageError(path.string() + ": PNG support was not compiled in (build with HCC_WITH_PNG=ON)");
}

void write_png(const fs::path& path, const Tensor&) {
  throw ImageError(path.string() + ": PNG support was not compiled in (build with HCC_WITH_PNG=ON)");
}

#endif

namespace {

std::string lower_ext(const fs::path& path) {
  std::string e = path.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

}  // namespace

bool is_image_path(const fs::path& path) {
  const auto e = lower_ext(path);
  return e == ".ppm" || (e == ".png" && png_supported());
}

Tensor read_image(const fs::path& path) {
  const auto e = lower_ext(path);
  if (e == ".ppm") return read_ppm(path);
  if (e == ".png") return read_png(path);
  throw ImageError(path.string() + ": unsupported image extension (use .ppm or .png)");
}

void write_image(const fs::path& path, const Tensor& image) {
  const auto e = lower_ext(path);
  if (e == ".ppm") return write_ppm(path, image);
  if (e == ".png") return write_png(path, image);
  throw ImageError(path.string() + ": unsupported image extension (use .ppm or .png)");
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ImageError(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_path(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  return out;
}

// ---------------------------------------------------------------------------
// Procedural images

Tensor constant_image(std::size_t height, std::size_t width, double r, double g, double b) {
  Tensor img(Shape{3, height, width});
  const double rgb[3] = {r, g, b};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < height * width; ++i) img[c * height * width + i] = rgb[c];
  }
  return img;
}

Tensor synthetic_image(std::size_t height, std::size_t width, std::uint64_t seed) {
  Rng rng(seed);
  Tensor img(Shape{3, height, width});
  const double fh = static_cast<double>(height), fw = static_cast<double>(width);

  double base[3], gy[3], gx[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.2, 0.8);
    gy[c] = rng.uniform(-0.3, 0.3);
    gx[c] = rng.uniform(-0.3, 0.3);
  }
  const double freq = rng.uniform(1.0, 4.0), phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double wave = rng.uniform(0.0, 0.15);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double u = x / fw, v = y / fh;
      const double s = wave * std::sin(2.0 * std::numbers::pi * freq * (u + 0.5 * v) + phase);
      for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = base[c] + gy[c] * (v - 0.5) + gx[c] * (u - 0.5) + s;
    }
  }

  const std::size_t shapes = 2 + rng.index(4);
  for (std::size_t k = 0; k < shapes; ++k) {
    double color[3];
    for (auto& c : color) c = rng.uniform();
    const bool disk = rng.uniform() < 0.5;
    const double cy = rng.uniform(0.0, fh), cx = rng.uniform(0.0, fw);
    const double ry = rng.uniform(0.1, 0.35) * fh, rx = rng.uniform(0.1, 0.35) * fw;
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dy = (y + 0.5 - cy) / ry, dx = (x + 0.5 - cx) / rx;
        const bool inside = disk ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (inside) {
          for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = color[c];
        }
      }
    }
  }

  const double noise = rng.uniform(0.0, 0.03);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::clamp(img[i] + noise * (rng.uniform() - 0.5), 0.0, 1.0);
  return round_to_8bit(img);
}

}  // namespace hcc
