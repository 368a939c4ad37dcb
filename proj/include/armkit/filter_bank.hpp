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

// Dictionary of smoothing atoms: anisotropic Gaussians parameterized by
// covariance Sigma = gamma^2 * U(theta) * diag(sigma1^2, sigma2^2) * U(theta)^T,
// plus a few difference-of-Gaussians (DoG) atoms built from pairs of them.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "armkit/rng.hpp"
#include "armkit/tensor.hpp"

namespace armkit {

struct KernelSpec {
  double theta = 0.0;
  double gamma = 1.0;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  int size = 3;

  // Row-major [[s00, s01], [s10, s11]].
  std::array<double, 4> covariance() const;
  void validate() const;
};

enum class KernelKind { kGaussian, kDog };

struct Kernel {
  KernelKind kind = KernelKind::kGaussian;
  int size = 0;
  std::vector<double> weights;  // size x size, row-major

  double at(int row, int col) const { return weights[static_cast<std::size_t>(row * size + col)]; }
  double center() const { return at(size / 2, size / 2); }
  double total() const;
};

// Intervals the sampler draws from.
struct SamplingIntervals {
  double theta_lo = 0.0, theta_hi = 3.14159265358979323846;
  double gamma_lo = 0.5, gamma_hi = 1.5;
  double sigma_lo = 0.4, sigma_hi = 1.6;
};

struct BankAtom {
  Kernel kernel;
  // One spec for Gaussian atoms; (positive, negative) pair for DoG atoms.
  std::vector<KernelSpec> specs;
};

struct FilterBank {
  std::vector<BankAtom> atoms;
  std::uint64_t seed = 0;
  int size = 0;

  std::size_t n() const { return atoms.size(); }
  std::size_t gaussian_count() const;
  std::size_t dog_count() const;
  // [n x k x k]
  Tensor as_tensor() const;
  void validate() const;
};

// Bivariate Gaussian PDF on the k x k integer grid centred at ((k-1)/2,
// (k-1)/2), renormalized so the weights sum to one on the grid. Offsets are
// (column - centre, row - centre).
Kernel gaussian_kernel(const KernelSpec& spec);

// gaussian_kernel(positive) - gaussian_kernel(negative).
Kernel dog_kernel(const KernelSpec& positive, const KernelSpec& negative);

KernelSpec sample_kernel_spec(Rng& rng, int size, const SamplingIntervals& intervals = {});

// Draws n - dog_count Gaussian atoms, then dog_count DoG atoms from random
// pairs of them (narrower minus wider, so DoG centres are positive).
FilterBank sample_bank(std::uint64_t seed, int n, int size, int dog_count,
                       const SamplingIntervals& intervals = {});

// Default DoG share: a quarter of the bank, rounded down.
int default_dog_count(int n);

nlohmann::json bank_sidecar(const FilterBank& bank);
// Writes `<path>` (AATD, n x k x k) and `<path with .json extension>`.
void export_bank(const FilterBank& bank, const std::filesystem::path& dump_path);
// Atoms are rebuilt from the sidecar specs and checked against the dump.
FilterBank import_bank(const std::filesystem::path& dump_path);
std::filesystem::path bank_sidecar_path(const std::filesystem::path& dump_path);

}  // namespace armkit
