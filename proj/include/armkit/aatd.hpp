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

#pragma once

// AATD binary tensor dumps:
//   "AATD" | u32 rank | rank x u32 dims | row-major f32 values
// All integers and floats little-endian. Values are narrowed from double on
// write and widened back on read.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "armkit/tensor.hpp"

namespace armkit {

struct TensorDump {
  Shape shape;
  std::vector<double> values;
};

std::string encode_aatd(const Shape& shape, std::span<const double> values);
TensorDump decode_aatd(const std::string& bytes);

void write_aatd(const std::filesystem::path& path, const Tensor& tensor);
void write_aatd(const std::filesystem::path& path, const Shape& shape, std::span<const double> values);
TensorDump read_aatd(const std::filesystem::path& path);
Tensor read_aatd_tensor(const std::filesystem::path& path, bool requires_grad = false);

// Writes via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace armkit
