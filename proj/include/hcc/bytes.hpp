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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hcc/entropy.hpp"
#include "hcc/tensor.hpp"

namespace hcc {

using Bytes = std::vector<std::uint8_t>;
using ModelId = std::array<std::uint8_t, 8>;

/// Big-endian byte sink.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void raw(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void tag(std::string_view four_cc);

  const Bytes& bytes() const { return buf_; }
  Bytes take() { return std::move(buf_); }

 private:
  Bytes buf_;
};

/// Big-endian byte source; throws CodecError on overrun.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::span<const std::uint8_t> raw(std::size_t n);
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
ModelId model_id_of(std::uint64_t hash);
std::string hex(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Versioned tensor dump: 4-byte tag, version byte, metadata blob, tensors in
/// order (rank, big-endian u32 dims, big-endian IEEE-754 doubles), and an
/// 8-byte FNV-1a hash of everything before it as trailer.
struct TensorFile {
  std::string tag;
  std::uint8_t version = 1;
  Bytes metadata;
  std::vector<Tensor> tensors;
};

Bytes encode_tensor_file(const TensorFile& file);
/// Verifies tag, version and trailer hash.
TensorFile decode_tensor_file(std::span<const std::uint8_t> bytes, std::string_view tag, std::uint8_t version);
/// The trailer of an encoded tensor file.
ModelId tensor_file_id(std::span<const std::uint8_t> bytes);

}  // namespace hcc
