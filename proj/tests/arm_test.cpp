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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "armkit/arm.hpp"
#include "armkit/grad_check.hpp"
#include "armkit/ops.hpp"
#include "oracles.hpp"

namespace armkit {
namespace {

using testing::random_tensor;

ArmConfig bank_config(std::uint64_t seed, int n, int dogs, bool modulation = false) {
  ArmConfig cfg;
  cfg.variant = ArmVariant::kBank;
  cfg.bank = sample_bank(seed, n, 3, dogs);
  cfg.use_external_modulation = modulation;
  return cfg;
}

Tensor one_hot_coeffs(std::size_t B, std::size_t C, std::size_t n, std::size_t j) {
  std::vector<double> v(B * C * n, 0.0);
  for (std::size_t i = 0; i < B * C; ++i) v[i * n + j] = 1.0;
  return Tensor::from({B, C, n}, std::move(v));
}

TEST(PredictCoefficients, ZeroHeadGivesUniform) {
  const ArmConfig cfg = bank_config(1, 8, 2);
  Rng rng(2);
  ArmParams p = init_arm_params(cfg, 3, rng);
  std::fill(p.coeff_weight.mutable_data().begin(), p.coeff_weight.mutable_data().end(), 0.0);
  const Tensor phi = predict_coefficients(random_tensor(rng, {2, 3, 5, 5}), p);
  ASSERT_EQ(phi.shape(), (Shape{2, 3, 8}));
  for (double v : phi.data()) EXPECT_NEAR(v, 1.0 / 8.0, 1e-15);
}

TEST(PredictCoefficients, RowsLieOnSimplex) {
  const ArmConfig cfg = bank_config(3, 8, 2);
  Rng rng(4);
  ArmParams p = init_arm_params(cfg, 4, rng);
  for (double& w : p.coeff_weight.mutable_data()) w = rng.normal(0.0, 3.0);
  for (double& w : p.coeff_bias.mutable_data()) w = rng.normal(0.0, 3.0);
  for (int t = 0; t < 50; ++t) {
    const Tensor phi = predict_coefficients(random_tensor(rng, {2, 4, 4, 4}, false, 5.0), p);
    for (std::size_t r = 0; r < 8; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_GT(phi.data()[r * 8 + j], 0.0);
        s += phi.data()[r * 8 + j];
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(PredictCoefficients, ChannelMismatchIsDimensionError) {
  const ArmConfig cfg = bank_config(5, 8, 2);
  Rng rng(6);
  const ArmParams p = init_arm_params(cfg, 3, rng);
  EXPECT_THROW(predict_coefficients(Tensor::zeros({1, 4, 3, 3}), p), DimensionError);
}

TEST(PredictCoefficients, HeadGradientsPassGradCheck) {
  const ArmConfig cfg = bank_config(7, 8, 2);
  Rng rng(8);
  ArmParams p = init_arm_params(cfg, 3, rng);
  for (double& w : p.coeff_weight.mutable_data()) w = rng.normal(0.0, 0.5);
  const Tensor x = random_tensor(rng, {2, 3, 4, 4});
  const Tensor probe = random_tensor(rng, {2, 3, 8});
  const auto r = grad_check_params([&] { return sum(mul(predict_coefficients(x, p), probe)); },
                                   {p.coeff_weight, p.coeff_bias});
  EXPECT_TRUE(r.passed) << r.diagnostic;
}

TEST(CombineFilters, OneHotSelectsAtomExactly) {
  const FilterBank bank = sample_bank(9, 8, 3, 2);
  for (std::size_t j = 0; j < 8; ++j) {
    const Tensor f = combine_filters(bank, one_hot_coeffs(2, 3, 8, j));
    ASSERT_EQ(f.shape(), (Shape{2, 3, 3, 3}));
    for (std::size_t bc = 0; bc < 6; ++bc) {
      for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(f.data()[bc * 9 + i], bank.atoms[j].kernel.weights[i]);
    }
  }
}

TEST(CombineFilters, UniformOverGaussianBankHasUnitSum) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FilterBank bank = sample_bank(seed, 8, 3, 0);
    const Tensor f = combine_filters(bank, Tensor::full({1, 2, 8}, 1.0 / 8.0));
    for (std::size_t bc = 0; bc < 2; ++bc) {
      double s = 0.0;
      for (std::size_t i = 0; i < 9; ++i) s += f.data()[bc * 9 + i];
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(CombineFilters, MixedBankSumEqualsGaussianMass) {
  Rng rng(10);
  const FilterBank bank = sample_bank(11, 8, 3, 3);
  std::vector<double> phi(4 * 8);
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < 8; ++j) s += phi[r * 8 + j] = -std::log(1.0 - rng.uniform());
    for (std::size_t j = 0; j < 8; ++j) phi[r * 8 + j] /= s;
  }
  const Tensor f = combine_filters(bank, Tensor::from({2, 2, 8}, phi));
  for (std::size_t r = 0; r < 4; ++r) {
    double mass = 0.0, total = 0.0;
    for (std::size_t j = 0; j < 8; ++j) mass += phi[r * 8 + j] * bank.atoms[j].kernel.total();
    for (std::size_t i = 0; i < 9; ++i) total += f.data()[r * 9 + i];
    EXPECT_NEAR(total, mass, 1e-12);
  }
}

TEST(CombineFilters, WrongCountIsDimensionError) {
  const FilterBank bank = sample_bank(12, 8, 3, 2);
  EXPECT_THROW(combine_filters(bank, Tensor::zeros({1, 1, 6})), DimensionError);
}

TEST(ApplyArm, GaussianVariantKeepsConstantInterior) {
  ArmConfig cfg;
  cfg.variant = ArmVariant::kGaussian;
  cfg.use_external_modulation = false;
  Rng rng(13);
  ArmParams p = init_arm_params(cfg, 2, rng);
  const Tensor y = apply_arm(Tensor::full({1, 2, 6, 6}, 0.7), cfg, p, true);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 1; i < 5; ++i) {
      for (std::size_t j = 1; j < 5; ++j) EXPECT_NEAR(y.at({0, c, i, j}), 0.7, 1e-14);
    }
  }
}

TEST(ApplyArm, FrozenOneHotHeadEqualsSingleAtomFilter) {
  const ArmConfig cfg = bank_config(14, 8, 2);
  Rng rng(15);
  ArmParams p = init_arm_params(cfg, 3, rng);
  const std::size_t j = 4;
  std::fill(p.coeff_weight.mutable_data().begin(), p.coeff_weight.mutable_data().end(), 0.0);
  for (std::size_t c = 0; c < 3; ++c) p.coeff_bias.mutable_data()[c * 8 + j] = 60.0;
  const Tensor x = random_tensor(rng, {2, 3, 5, 5});
  const Tensor y = apply_arm(x, cfg, p, false);
  std::vector<double> k;
  for (int c = 0; c < 3; ++c) k.insert(k.end(), cfg.bank->atoms[j].kernel.weights.begin(), cfg.bank->atoms[j].kernel.weights.end());
  const Tensor ref = depthwise_conv2d(x, Tensor::from({3, 3, 3}, k));
  for (std::size_t i = 0; i < ref.numel(); ++i) EXPECT_NEAR(y.data()[i], ref.data()[i], 1e-12);
}

TEST(ApplyArm, ImpulsePeakDropsUnderAnyGaussianAtom) {
  const ArmConfig cfg = bank_config(16, 8, 2);
  Rng rng(17);
  ArmParams p = init_arm_params(cfg, 1, rng);
  std::vector<double> img(49, 0.0);
  img[24] = 1.0;
  const Tensor x = Tensor::from({1, 1, 7, 7}, img);
  for (std::size_t j = 0; j < 8; ++j) {
    if (cfg.bank->atoms[j].kernel.kind != KernelKind::kGaussian) continue;
    std::fill(p.coeff_bias.mutable_data().begin(), p.coeff_bias.mutable_data().end(), 0.0);
    std::fill(p.coeff_weight.mutable_data().begin(), p.coeff_weight.mutable_data().end(), 0.0);
    p.coeff_bias.mutable_data()[j] = 60.0;
    const Tensor y = apply_arm(x, cfg, p, false);
    double peak = 0.0, energy_in = 0.0, energy_out = 0.0;
    for (std::size_t i = 0; i < 49; ++i) {
      peak = std::max(peak, std::abs(y.data()[i]));
      energy_in += img[i] * img[i];
      energy_out += y.data()[i] * y.data()[i];
    }
    EXPECT_LT(peak, 1.0);
    EXPECT_NEAR(y.data()[24], cfg.bank->atoms[j].kernel.center(), 1e-12);
    EXPECT_LT(energy_out, energy_in);
  }
}

TEST(ApplyArm, TooSmallMapIsConfigError) {
  const ArmConfig cfg = bank_config(18, 8, 2);
  Rng rng(19);
  ArmParams p = init_arm_params(cfg, 1, rng);
  EXPECT_THROW(apply_arm(Tensor::zeros({1, 1, 2, 5}), cfg, p, false), ConfigError);
}

TEST(ApplyArm, ConfigInvariantsAreEnforced) {
  ArmConfig cfg;
  cfg.variant = ArmVariant::kBank;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.variant = ArmVariant::kGaussian;
  cfg.bank = sample_bank(1, 8, 3, 2);
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.bank.reset();
  cfg.kernel_size = 4;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(parse_arm_variant("median"), ConfigError);
}

TEST(ApplyArmProperties, ShapeIsPreservedForEveryVariant) {
  Rng rng(20);
  for (ArmVariant v : {ArmVariant::kGaussian, ArmVariant::kLearnable, ArmVariant::kBank}) {
    for (bool mod : {false, true}) {
      ArmConfig cfg;
      cfg.variant = v;
      cfg.use_external_modulation = mod;
      if (v == ArmVariant::kBank) cfg.bank = sample_bank(21, 8, 3, 2);
      ArmParams p = init_arm_params(cfg, 3, rng);
      const Tensor x = random_tensor(rng, {2, 3, 4, 6});
      EXPECT_EQ(apply_arm(x, cfg, p, true).shape(), x.shape());
      EXPECT_EQ(apply_arm(x, cfg, p, false).shape(), x.shape());
    }
  }
}

TEST(ApplyArmProperties, GaussianCombinationsStayInConvexHullAndReduceVariation) {
  Rng rng(22);
  for (int trial = 0; trial < 120; ++trial) {
    const ArmConfig cfg = bank_config(100 + trial, 2 + static_cast<int>(rng.below(10)), 0);
    ArmParams p = init_arm_params(cfg, 2, rng);
    for (double& w : p.coeff_weight.mutable_data()) w = rng.normal(0.0, 2.0);
    const std::size_t H = 5 + rng.below(6), W = 5 + rng.below(6);
    const Tensor x = random_tensor(rng, {1, 2, H, W});
    const Tensor f = combine_filters(*cfg.bank, predict_coefficients(x, p));
    for (double v : f.data()) ASSERT_GE(v, 0.0);
    const Tensor y = apply_arm(x, cfg, p, false);
    for (std::size_t c = 0; c < 2; ++c) {
      const double* xin = x.data().data() + c * H * W;
      const double* yout = y.data().data() + c * H * W;
      const auto [lo, hi] = std::minmax_element(xin, xin + H * W);
      for (std::size_t i = 1; i + 1 < H; ++i) {
        for (std::size_t j = 1; j + 1 < W; ++j) {
          EXPECT_GE(yout[i * W + j], *lo - 1e-12);
          EXPECT_LE(yout[i * W + j], *hi + 1e-12);
        }
      }
      EXPECT_LE(testing::total_variation(yout, H, W, 1), testing::total_variation(xin, H, W, 1) + 1e-12);
    }
  }
}

TEST(ApplyArmProperties, GradientsPassForAllVariantsWithAndWithoutModulation) {
  Rng rng(23);
  for (ArmVariant v : {ArmVariant::kGaussian, ArmVariant::kLearnable, ArmVariant::kBank}) {
    for (bool mod : {false, true}) {
      ArmConfig cfg;
      cfg.variant = v;
      cfg.use_external_modulation = mod;
      if (v == ArmVariant::kBank) cfg.bank = sample_bank(24, 8, 3, 2);
      ArmParams p = init_arm_params(cfg, 2, rng);
      if (p.coeff_weight.defined()) {
        for (double& w : p.coeff_weight.mutable_data()) w = rng.normal(0.0, 0.5);
      }
      if (p.modulation) {
        p.modulation->gamma.mutable_data()[0] = 1.3;
        p.modulation->beta.mutable_data()[1] = 0.2;
      }
      Tensor x = random_tensor(rng, {2, 2, 4, 4}, true);
      const Tensor probe = random_tensor(rng, {2, 2, 4, 4});
      std::vector<Tensor> params = p.trainable();
      params.push_back(x);
      const auto saved_mean = p.modulation ? p.modulation->running_mean : std::vector<double>{};
      const auto r = grad_check_params(
          [&] {
            if (p.modulation) p.modulation->running_mean = saved_mean;
            return sum(mul(apply_arm(x, cfg, p, true), probe));
          },
          params, {1e-5, 1e-4, 1e-4, 0});
      EXPECT_TRUE(r.passed) << to_string(v) << (mod ? " +mod: " : ": ") << r.diagnostic;
    }
  }
}

TEST(ApplyArmProperties, RepeatedCallsAreBitIdentical) {
  const ArmConfig cfg = bank_config(25, 8, 2, true);
  Rng rng(26);
  ArmParams p1 = init_arm_params(cfg, 3, rng);
  ArmParams p2 = p1;
  p2.modulation = ModulationState::identity(3);
  p2.modulation->gamma = p1.modulation->gamma.clone();
  const Tensor x = random_tensor(rng, {2, 3, 5, 5});
  const Tensor a = apply_arm(x, cfg, p1, true);
  const Tensor b = apply_arm(x, cfg, p2, true);
  EXPECT_EQ(std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)), 0);
  EXPECT_EQ(p1.modulation->running_mean, p2.modulation->running_mean);
}

TEST(ArmParamsInit, LearnableStartsNearGaussian) {
  ArmConfig cfg;
  cfg.variant = ArmVariant::kLearnable;
  Rng rng(27);
  const ArmParams p = init_arm_params(cfg, 4, rng);
  const Kernel g = gaussian_kernel({0.0, 1.0, 1.0, 1.0, 3});
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(p.learnable_kernels.data()[c * 9 + i], g.weights[i], 0.06);
  }
}

}  // namespace
}  // namespace armkit
