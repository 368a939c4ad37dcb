// Copyright 2026 The ARMKit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "armkit/aatd.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace armkit {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw ParseError("AATD: truncated header at byte " + std::to_string(pos));
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::string encode_aatd(const Shape& shape, std::span<const double> values) {
  if (numel(shape) != values.size()) {
    throw DimensionError("AATD: shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) +
                         " values");
  }
  std::string out = "AATD";
  out.reserve(8 + 4 * shape.size() + 4 * values.size());
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

TensorDump decode_aatd(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "AATD") != 0) throw ParseError("AATD: bad magic");
  std::size_t pos = 4;
  TensorDump dump;
  const std::uint32_t rank = get_u32(bytes, pos);
  for (std::uint32_t i = 0; i < rank; ++i) dump.shape.push_back(get_u32(bytes, pos));
  const std::size_t n = numel(dump.shape);
  if (bytes.size() != pos + 4 * n) {
    throw ParseError("AATD: expected " + std::to_string(n) + " values for " + shape_str(dump.shape) + ", file has " +
                     std::to_string((bytes.size() - pos) / 4));
  }
  dump.values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) dump.values.push_back(std::bit_cast<float>(get_u32(bytes, pos)));
  return dump;
}

void write_aatd(const std::filesystem::path& path, const Tensor& tensor) {
  write_aatd(path, tensor.shape(), tensor.data());
}

void write_aatd(const std::filesystem::path& path, const Shape& shape, std::span<const double> values) {
  write_file_atomic(path, encode_aatd(shape, values));
}

TensorDump read_aatd(const std::filesystem::path& path) { return decode_aatd(read_file(path)); }

Tensor read_aatd_tensor(const std::filesystem::path& path, bool requires_grad) {
  TensorDump dump = read_aatd(path);
  return Tensor::from(std::move(dump.shape), std::move(dump.values), requires_grad);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace armkit
