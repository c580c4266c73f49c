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

#include "hcc/bytes.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace hcc {

void ByteWriter::u16(std::uint16_t v) {
  u8(static_cast<std::uint8_t>(v >> 8));
  u8(static_cast<std::uint8_t>(v));
}

void ByteWriter::u32(std::uint32_t v) {
  u16(static_cast<std::uint16_t>(v >> 16));
  u16(static_cast<std::uint16_t>(v));
}

void ByteWriter::u64(std::uint64_t v) {
  u32(static_cast<std::uint32_t>(v >> 32));
  u32(static_cast<std::uint32_t>(v));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::tag(std::string_view four_cc) {
  if (four_cc.size() != 4) throw std::invalid_argument("tag must be four characters");
  for (char c : four_cc) u8(static_cast<std::uint8_t>(c));
}

std::uint8_t ByteReader::u8() { return raw(1)[0]; }

std::uint16_t ByteReader::u16() {
  auto b = raw(2);
  return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
}

std::uint32_t ByteReader::u32() {
  const std::uint32_t hi = u16();
  return (hi << 16) | u16();
}

std::uint64_t ByteReader::u64() {
  const std::uint64_t hi = u32();
  return (hi << 32) | u32();
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  if (n > remaining()) {
    throw CodecError("unexpected end of data at byte " + std::to_string(pos_) + " (need " + std::to_string(n) + ")");
  }
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

ModelId model_id_of(std::uint64_t hash) {
  ModelId id{};
  for (int i = 0; i < 8; ++i) id[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(hash >> (56 - 8 * i));
  return id;
}

std::string hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 15]);
  }
  return s;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

Bytes encode_tensor_file(const TensorFile& file) {
  ByteWriter w;
  w.tag(file.tag);
  w.u8(file.version);
  w.u32(static_cast<std::uint32_t>(file.metadata.size()));
  w.raw(file.metadata);
  w.u32(static_cast<std::uint32_t>(file.tensors.size()));
  for (const auto& t : file.tensors) {
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.f64(v);
  }
  const std::uint64_t h = fnv1a64(w.bytes());
  w.u64(h);
  return w.take();
}

TensorFile decode_tensor_file(std::span<const std::uint8_t> bytes, std::string_view tag, std::uint8_t version) {
  if (bytes.size() < 4 + 1 + 8) throw CodecError("model file too short");
  if (std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != tag) {
    throw CodecError("bad magic: expected " + std::string(tag));
  }
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader trailer(bytes.last(8));
  if (trailer.u64() != fnv1a64(body)) throw CodecError("model file hash mismatch");

  ByteReader r(body);
  r.raw(4);
  TensorFile f;
  f.tag = std::string(tag);
  f.version = r.u8();
  if (f.version != version) {
    throw CodecError("unsupported model file version " + std::to_string(f.version));
  }
  const std::uint32_t meta = r.u32();
  auto m = r.raw(meta);
  f.metadata.assign(m.begin(), m.end());
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint8_t rank = r.u8();
    Shape shape;
    for (std::uint8_t k = 0; k < rank; ++k) shape.push_back(r.u32());
    const std::size_t n = shape_numel(shape);
    if (n * 8 > r.remaining()) throw CodecError("model file tensor " + std::to_string(i) + " is truncated");
    std::vector<double> data(n);
    for (auto& v : data) v = r.f64();
    f.tensors.emplace_back(std::move(shape), std::move(data));
  }
  if (r.remaining() != 0) throw CodecError("trailing bytes in model file");
  return f;
}

ModelId tensor_file_id(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw CodecError("model file too short");
  ModelId id{};
  std::copy(bytes.end() - 8, bytes.end(), id.begin());
  return id;
}

}  // namespace hcc
