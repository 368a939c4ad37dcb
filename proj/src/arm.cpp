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

#include "armkit/arm.hpp"

#include "armkit/errors.hpp"
#include "armkit/ops.hpp"

namespace armkit {

std::string to_string(ArmVariant v) {
  switch (v) {
    case ArmVariant::kGaussian:
      return "gaussian";
    case ArmVariant::kLearnable:
      return "learnable";
    case ArmVariant::kBank:
      return "bank";
  }
  return "unknown";
}

ArmVariant parse_arm_variant(const std::string& name) {
  if (name == "gaussian") return ArmVariant::kGaussian;
  if (name == "learnable") return ArmVariant::kLearnable;
  if (name == "bank") return ArmVariant::kBank;
  throw ConfigError("arm.variant: expected gaussian | learnable | bank, got '" + name + "'");
}

int ArmConfig::effective_kernel_size() const {
  return variant == ArmVariant::kBank && bank ? bank->size : kernel_size;
}

void ArmConfig::validate() const {
  if (variant == ArmVariant::kBank && !bank) throw ConfigError("arm: bank variant requires a filter bank");
  if (variant != ArmVariant::kBank && bank) {
    throw ConfigError("arm: a filter bank is only allowed with the bank variant (variant is " + to_string(variant) + ")");
  }
  if (bank) bank->validate();
  const int k = effective_kernel_size();
  if (k < 3 || k % 2 == 0) throw ConfigError("arm.k: must be odd and >= 3, got " + std::to_string(k));
  if (variant == ArmVariant::kGaussian && !(gaussian_sigma > 0.0)) {
    throw ConfigError("arm.gaussian_sigma: must be positive");
  }
}

std::vector<Tensor> ArmParams::trainable() const {
  std::vector<Tensor> out;
  for (const Tensor* t : {&coeff_weight, &coeff_bias, &learnable_kernels}) {
    if (t->defined()) out.push_back(*t);
  }
  if (modulation) {
    out.push_back(modulation->gamma);
    out.push_back(modulation->beta);
  }
  return out;
}

std::size_t ArmParams::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& t : trainable()) n += t.numel();
  return n;
}

ArmParams init_arm_params(const ArmConfig& cfg, std::size_t channels, Rng& rng) {
  cfg.validate();
  ArmParams p;
  p.channels = channels;
  const std::size_t k = static_cast<std::size_t>(cfg.effective_kernel_size());
  const Kernel base = gaussian_kernel({0.0, 1.0, cfg.gaussian_sigma, cfg.gaussian_sigma, static_cast<int>(k)});
  switch (cfg.variant) {
    case ArmVariant::kGaussian: {
      std::vector<double> w;
      for (std::size_t c = 0; c < channels; ++c) w.insert(w.end(), base.weights.begin(), base.weights.end());
      p.fixed_kernels = Tensor::from({channels, k, k}, std::move(w));
      break;
    }
    case ArmVariant::kLearnable: {
      std::vector<double> w;
      for (std::size_t c = 0; c < channels; ++c) {
        for (double v : base.weights) w.push_back(v + rng.normal(0.0, 0.01));
      }
      p.learnable_kernels = Tensor::from({channels, k, k}, std::move(w), true);
      break;
    }
    case ArmVariant::kBank: {
      const std::size_t n = cfg.bank->n();
      std::vector<double> w(channels * n);
      for (double& v : w) v = rng.normal(0.0, 0.02);
      p.coeff_weight = Tensor::from({channels, n}, std::move(w), true);
      p.coeff_bias = Tensor::zeros({channels, n}, true);
      break;
    }
  }
  if (cfg.use_external_modulation) {
    // The norm closes a residual branch; a unit gamma would rescale a small
    // attention output to unit variance at step 0.
    p.modulation = ModulationState::identity(channels);
    for (double& g : p.modulation->gamma.mutable_data()) g = kModulationGammaInit;
  }
  return p;
}

Tensor predict_coefficients(const Tensor& attn, const ArmParams& params) {
  if (!params.coeff_weight.defined()) throw ConfigError("predict_coefficients: ARM is not a bank variant");
  if (attn.rank() != 4) throw DimensionError("predict_coefficients: expected [B x C x H x W], got " + shape_str(attn.shape()));
  const std::size_t B = attn.dim(0), C = attn.dim(1);
  if (params.coeff_weight.dim(0) != C) {
    throw DimensionError("predict_coefficients: head expects " + std::to_string(params.coeff_weight.dim(0)) +
                         " channels, input " + shape_str(attn.shape()));
  }
  const std::size_t n = params.coeff_weight.dim(1);
  const Tensor pooled = mean_axis(mean_axis(attn, 3), 2);  // B x C
  std::vector<std::size_t> repeat(B * C * n);
  for (std::size_t i = 0; i < repeat.size(); ++i) repeat[i] = i / n;
  const Tensor tiled = gather(pooled, {B, C, n}, std::move(repeat));
  const Tensor logits = add(mul(tiled, params.coeff_weight), params.coeff_bias);
  return softmax_rows(logits);
}

Tensor combine_filters(const FilterBank& bank, const Tensor& coeffs) {
  if (coeffs.rank() != 3) throw DimensionError("combine_filters: expected [B x C x n], got " + shape_str(coeffs.shape()));
  const std::size_t B = coeffs.dim(0), C = coeffs.dim(1), n = coeffs.dim(2);
  if (n != bank.n()) {
    throw DimensionError("combine_filters: " + std::to_string(n) + " coefficients for a bank of " +
                         std::to_string(bank.n()) + " atoms");
  }
  const std::size_t k = static_cast<std::size_t>(bank.size);
  const Tensor atoms = reshape(bank.as_tensor(), {n, k * k});
  return reshape(matmul(reshape(coeffs, {B * C, n}), atoms), {B, C, k, k});
}

Tensor apply_arm(const Tensor& attn, const ArmConfig& cfg, ArmParams& params, bool training) {
  if (attn.rank() != 4) throw DimensionError("apply_arm: expected [B x C x H x W], got " + shape_str(attn.shape()));
  const std::size_t k = static_cast<std::size_t>(cfg.effective_kernel_size());
  if (attn.dim(2) < k || attn.dim(3) < k) {
    throw ConfigError("apply_arm: spatial size " + std::to_string(attn.dim(2)) + "x" + std::to_string(attn.dim(3)) +
                      " is smaller than the " + std::to_string(k) + "x" + std::to_string(k) + " filter");
  }
  if (attn.dim(1) != params.channels) {
    throw DimensionError("apply_arm: params built for " + std::to_string(params.channels) + " channels, input " +
                         shape_str(attn.shape()));
  }
  Tensor filtered;
  switch (cfg.variant) {
    case ArmVariant::kGaussian:
      filtered = depthwise_conv2d(attn, params.fixed_kernels);
      break;
    case ArmVariant::kLearnable:
      filtered = depthwise_conv2d(attn, params.learnable_kernels);
      break;
    case ArmVariant::kBank:
      filtered = depthwise_conv2d_batched(attn, combine_filters(*cfg.bank, predict_coefficients(attn, params)));
      break;
  }
  if (cfg.use_external_modulation) {
    if (!params.modulation) throw ConfigError("apply_arm: external modulation enabled but no modulation state");
    filtered = batch_norm2d(filtered, *params.modulation, training);
  }
  return filtered;
}

}  // namespace armkit
