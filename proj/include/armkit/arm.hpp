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

// Aliasing Reduction Module: smooths folded attention maps [B x C x H x W]
// with a depthwise filter, then optionally rescales them with batch
// statistics ("external modulation").
//
//   gaussian  - one frozen isotropic Gaussian shared by every channel
//   learnable - one trainable k x k kernel per channel
//   bank      - per (sample, channel) kernel F = sum_j phi_j D_j over a fixed
//               filter bank D, with phi = softmax(head(avgpool(x)))

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "armkit/batch_norm.hpp"
#include "armkit/filter_bank.hpp"
#include "armkit/rng.hpp"
#include "armkit/tensor.hpp"

namespace armkit {

enum class ArmVariant { kGaussian, kLearnable, kBank };

std::string to_string(ArmVariant v);
ArmVariant parse_arm_variant(const std::string& name);

struct ArmConfig {
  ArmVariant variant = ArmVariant::kBank;
  int kernel_size = 3;
  // Fixed-Gaussian variant width.
  double gaussian_sigma = 1.0;
  bool use_external_modulation = true;
  std::optional<FilterBank> bank;

  // Kernel size actually used (the bank's for the bank variant).
  int effective_kernel_size() const;
  void validate() const;
};

// Coefficient head: a grouped 1x1 convolution. Channel c's pooled value p_c
// produces the n logits w[c, :] * p_c + b[c, :].
struct ArmParams {
  std::size_t channels = 0;
  Tensor coeff_weight;       // [C x n], bank variant
  Tensor coeff_bias;         // [C x n], bank variant
  Tensor learnable_kernels;  // [C x k x k], learnable variant
  Tensor fixed_kernels;      // [C x k x k], gaussian variant (not trained)
  std::optional<ModulationState> modulation;

  std::vector<Tensor> trainable() const;
  std::size_t parameter_count() const;
};

// Initial gamma of the external modulation.
inline constexpr double kModulationGammaInit = 0.1;

ArmParams init_arm_params(const ArmConfig& cfg, std::size_t channels, Rng& rng);

// [B x C x H x W] -> [B x C x n], each (b, c) row on the probability simplex.
Tensor predict_coefficients(const Tensor& attn, const ArmParams& params);

// F[b, c] = sum_j coeffs[b, c, j] * bank[j]; returns [B x C x k x k].
Tensor combine_filters(const FilterBank& bank, const Tensor& coeffs);

Tensor apply_arm(const Tensor& attn, const ArmConfig& cfg, ArmParams& params, bool training);

}  // namespace armkit
