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

#include "armkit/filter_bank.hpp"

#include <cmath>
#include <numbers>

#include "armkit/aatd.hpp"
#include "armkit/errors.hpp"

namespace armkit {

std::array<double, 4> KernelSpec::covariance() const {
  const double c = std::cos(theta), s = std::sin(theta);
  const double l1 = sigma1 * sigma1, l2 = sigma2 * sigma2;
  const double g2 = gamma * gamma;
  // U diag(l1, l2) U^T with U = [[c, -s], [s, c]].
  const double s00 = g2 * (c * c * l1 + s * s * l2);
  const double s01 = g2 * (c * s * (l1 - l2));
  const double s11 = g2 * (s * s * l1 + c * c * l2);
  return {s00, s01, s01, s11};
}

void KernelSpec::validate() const {
  if (!(gamma > 0.0)) throw ConfigError("kernel spec: gamma must be positive, got " + std::to_string(gamma));
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) {
    throw ConfigError("kernel spec: sigma1/sigma2 must be positive, got " + std::to_string(sigma1) + ", " +
                      std::to_string(sigma2));
  }
  if (size < 3 || size % 2 == 0) throw ConfigError("kernel spec: size must be odd and >= 3, got " + std::to_string(size));
  if (!std::isfinite(theta)) throw ConfigError("kernel spec: theta must be finite");
}

double Kernel::total() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

Kernel gaussian_kernel(const KernelSpec& spec) {
  spec.validate();
  const auto cov = spec.covariance();
  const double det = cov[0] * cov[3] - cov[1] * cov[2];
  const double i00 = cov[3] / det, i01 = -cov[1] / det, i11 = cov[0] / det;
  const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(det));
  const int k = spec.size;
  const double centre = (k - 1) / 2.0;
  Kernel kernel;
  kernel.kind = KernelKind::kGaussian;
  kernel.size = k;
  kernel.weights.resize(static_cast<std::size_t>(k * k));
  double total = 0.0;
  for (int row = 0; row < k; ++row) {
    for (int col = 0; col < k; ++col) {
      const double dx = col - centre, dy = row - centre;
      const double q = dx * (i00 * dx + i01 * dy) + dy * (i01 * dx + i11 * dy);
      const double w = norm * std::exp(-0.5 * q);
      kernel.weights[static_cast<std::size_t>(row * k + col)] = w;
      total += w;
    }
  }
  for (double& w : kernel.weights) w /= total;
  return kernel;
}

Kernel dog_kernel(const KernelSpec& positive, const KernelSpec& negative) {
  if (positive.size != negative.size) {
    throw ConfigError("dog_kernel: sizes differ (" + std::to_string(positive.size) + " vs " +
                      std::to_string(negative.size) + ")");
  }
  const Kernel a = gaussian_kernel(positive);
  const Kernel b = gaussian_kernel(negative);
  Kernel out;
  out.kind = KernelKind::kDog;
  out.size = a.size;
  out.weights.resize(a.weights.size());
  double largest = 0.0;
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    out.weights[i] = a.weights[i] - b.weights[i];
    largest = std::max(largest, std::abs(out.weights[i]));
  }
  if (largest < 1e-12) throw ConfigError("dog_kernel: specs produce the same Gaussian; the DoG atom would be zero");
  return out;
}

KernelSpec sample_kernel_spec(Rng& rng, int size, const SamplingIntervals& iv) {
  KernelSpec spec;
  spec.size = size;
  spec.theta = rng.uniform(iv.theta_lo, iv.theta_hi);
  spec.gamma = rng.uniform(iv.gamma_lo, iv.gamma_hi);
  spec.sigma1 = rng.uniform(iv.sigma_lo, iv.sigma_hi);
  spec.sigma2 = rng.uniform(iv.sigma_lo, iv.sigma_hi);
  return spec;
}

int default_dog_count(int n) { return n / 4; }

std::size_t FilterBank::gaussian_count() const {
  std::size_t c = 0;
  for (const auto& a : atoms) c += a.kernel.kind == KernelKind::kGaussian;
  return c;
}

std::size_t FilterBank::dog_count() const { return n() - gaussian_count(); }

Tensor FilterBank::as_tensor() const {
  const std::size_t k = static_cast<std::size_t>(size);
  std::vector<double> values;
  values.reserve(n() * k * k);
  for (const auto& a : atoms) values.insert(values.end(), a.kernel.weights.begin(), a.kernel.weights.end());
  return Tensor::from({n(), k, k}, std::move(values));
}

void FilterBank::validate() const {
  if (atoms.size() < 2) throw ConfigError("filter bank: needs at least 2 atoms, got " + std::to_string(atoms.size()));
  if (gaussian_count() == 0) throw ConfigError("filter bank: needs at least one Gaussian atom");
  for (const auto& a : atoms) {
    if (a.kernel.size != size) throw ConfigError("filter bank: atoms must share one kernel size");
  }
}

FilterBank sample_bank(std::uint64_t seed, int n, int size, int dog_count, const SamplingIntervals& intervals) {
  if (n < 2) throw ConfigError("sample_bank: n must be >= 2, got " + std::to_string(n));
  if (dog_count < 0 || dog_count >= n) {
    throw ConfigError("sample_bank: dog_count must be in [0, n), got " + std::to_string(dog_count) + " for n=" +
                      std::to_string(n));
  }
  if (size < 3 || size % 2 == 0) throw ConfigError("sample_bank: k must be odd and >= 3, got " + std::to_string(size));
  Rng rng(seed);
  FilterBank bank;
  bank.seed = seed;
  bank.size = size;
  const int gaussians = n - dog_count;
  for (int i = 0; i < gaussians; ++i) {
    KernelSpec spec = sample_kernel_spec(rng, size, intervals);
    bank.atoms.push_back({gaussian_kernel(spec), {spec}});
  }
  for (int d = 0; d < dog_count; ++d) {
    KernelSpec a, b;
    if (gaussians >= 2) {
      const auto i = rng.below(static_cast<std::uint64_t>(gaussians));
      auto j = rng.below(static_cast<std::uint64_t>(gaussians - 1));
      if (j >= i) ++j;
      a = bank.atoms[i].specs[0];
      b = bank.atoms[j].specs[0];
    } else {
      a = bank.atoms[0].specs[0];
      b = sample_kernel_spec(rng, size, intervals);
    }
    // Narrower Gaussian (larger centre weight) goes first.
    if (gaussian_kernel(a).center() < gaussian_kernel(b).center()) std::swap(a, b);
    bank.atoms.push_back({dog_kernel(a, b), {a, b}});
  }
  bank.validate();
  return bank;
}

namespace {

nlohmann::json spec_json(const KernelSpec& s) {
  return {{"theta", s.theta}, {"gamma", s.gamma}, {"sigma1", s.sigma1}, {"sigma2", s.sigma2}, {"size", s.size}};
}

KernelSpec spec_from_json(const nlohmann::json& j) {
  KernelSpec s;
  s.theta = j.at("theta").get<double>();
  s.gamma = j.at("gamma").get<double>();
  s.sigma1 = j.at("sigma1").get<double>();
  s.sigma2 = j.at("sigma2").get<double>();
  s.size = j.at("size").get<int>();
  return s;
}

}  // namespace

nlohmann::json bank_sidecar(const FilterBank& bank) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : bank.atoms) {
    nlohmann::json specs = nlohmann::json::array();
    for (const auto& s : a.specs) specs.push_back(spec_json(s));
    atoms.push_back({{"kind", a.kernel.kind == KernelKind::kGaussian ? "gaussian" : "dog"}, {"specs", specs}});
  }
  return {{"seed", bank.seed},
          {"n", bank.n()},
          {"k", bank.size},
          {"gaussian_count", bank.gaussian_count()},
          {"dog_count", bank.dog_count()},
          {"atoms", atoms}};
}

std::filesystem::path bank_sidecar_path(const std::filesystem::path& dump_path) {
  std::filesystem::path p = dump_path;
  p.replace_extension(".json");
  return p;
}

void export_bank(const FilterBank& bank, const std::filesystem::path& dump_path) {
  write_aatd(dump_path, bank.as_tensor());
  write_file_atomic(bank_sidecar_path(dump_path), bank_sidecar(bank).dump(2) + "\n");
}

FilterBank import_bank(const std::filesystem::path& dump_path) {
  const TensorDump dump = read_aatd(dump_path);
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_file(bank_sidecar_path(dump_path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("bank sidecar: " + std::string(e.what()));
  }
  FilterBank bank;
  bank.seed = side.at("seed").get<std::uint64_t>();
  bank.size = side.at("k").get<int>();
  for (const auto& atom : side.at("atoms")) {
    const std::string kind = atom.at("kind").get<std::string>();
    const auto& specs = atom.at("specs");
    if (kind == "gaussian" && specs.size() == 1) {
      const KernelSpec s = spec_from_json(specs[0]);
      bank.atoms.push_back({gaussian_kernel(s), {s}});
    } else if (kind == "dog" && specs.size() == 2) {
      const KernelSpec a = spec_from_json(specs[0]), b = spec_from_json(specs[1]);
      bank.atoms.push_back({dog_kernel(a, b), {a, b}});
    } else {
      throw ParseError("bank sidecar: malformed atom of kind '" + kind + "'");
    }
  }
  bank.validate();
  const std::size_t k = static_cast<std::size_t>(bank.size);
  if (dump.shape != Shape{bank.n(), k, k}) {
    throw ParseError("bank dump shape " + shape_str(dump.shape) + " does not match sidecar");
  }
  const Tensor rebuilt = bank.as_tensor();
  for (std::size_t i = 0; i < dump.values.size(); ++i) {
    if (std::abs(rebuilt.data()[i] - dump.values[i]) > 1e-6) {
      throw ParseError("bank dump disagrees with sidecar specs at element " + std::to_string(i));
    }
  }
  return bank;
}

}  // namespace armkit
