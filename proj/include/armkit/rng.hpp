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

#include <cstdint>
#include <string_view>

namespace armkit {

// SplitMix64 as a counter-based generator: the i-th output (i = 1, 2, ...)
// of stream `seed` is mix64(seed + i * 0x9E3779B97F4A7C15). Uniforms take the
// top 53 bits; normals use Box-Muller (cosine branch only, two uniforms per
// draw). Streams are defined bit-for-bit; std:: distributions are
// implementation-defined and must not be used for anything seeded.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // [0, 1)
  double uniform();
  // [lo, hi)
  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  // Integer in [0, n); n > 0. Uses the multiply-high reduction.
  std::uint64_t below(std::uint64_t n);

  static std::uint64_t mix64(std::uint64_t z);

 private:
  std::uint64_t state_;
};

// Independent stream for (master, index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);
// Independent stream for (master, label); label hashed with FNV-1a 64.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace armkit
