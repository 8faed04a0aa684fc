// Copyright 2026 The fedpad-sim Authors
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

#include "fedpad/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fedpad/error.hpp"
#include "fedpad/rng.hpp"

namespace fedpad::io {

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteWriter::shape(const Shape& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  for (auto d : s) u64(d);
}

void ByteWriter::values(const Tensor& t) {
  for (double v : t.data()) f64(v);
}

void ByteWriter::checksum() { u64(io::checksum(buf_)); }

void ByteReader::need(std::size_t n, const char* what) const {
  if (data_.size() - pos_ < n) {
    throw ParseError(std::string("truncated input while reading ") + what, pos_);
  }
}

std::uint8_t ByteReader::u8() {
  need(1, "u8");
  return data_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4, "u32");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8, "u64");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str(std::size_t max_len) {
  const std::size_t at = pos_;
  const std::uint32_t n = u32();
  if (n > max_len) throw ParseError("string length " + std::to_string(n) + " too large", at);
  need(n, "string bytes");
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

Shape ByteReader::shape(std::size_t max_rank) {
  const std::size_t at = pos_;
  const std::uint32_t rank = u32();
  if (rank == 0 || rank > max_rank) throw ParseError("bad tensor rank " + std::to_string(rank), at);
  Shape s(rank);
  std::uint64_t total = 1;
  for (auto& d : s) {
    const std::size_t dim_at = pos_;
    d = u64();
    if (d == 0 || d > (1ULL << 32)) throw ParseError("bad tensor dimension", dim_at);
    total *= d;
    if (total > (1ULL << 40)) throw ParseError("tensor too large", dim_at);
  }
  return s;
}

Tensor ByteReader::tensor(const Shape& shape) {
  const std::size_t n = shape_size(shape);
  if (n > remaining() / 8) throw ParseError("truncated tensor values", pos_);
  std::vector<double> v(n);
  for (auto& x : v) x = f64();
  return Tensor(shape, std::move(v));
}

void ByteReader::verify_checksum() {
  const std::size_t body_end = pos_;
  const std::uint64_t stored = u64();
  const std::uint64_t actual = checksum(data_.subspan(0, body_end));
  if (stored != actual) throw ParseError("checksum mismatch", body_end);
}

void ByteReader::expect_end() const {
  if (pos_ != data_.size()) throw ParseError("trailing bytes after record", pos_);
}

std::uint64_t checksum(std::span<const std::uint8_t> bytes) noexcept {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fedpad::io
