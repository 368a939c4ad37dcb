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

#include <cstddef>
#include <vector>

#include "armkit/tensor.hpp"

namespace armkit {

// Per-channel affine parameters plus running statistics for batch_norm2d.
// gamma/beta are trainable leaves; the running statistics are buffers that
// training-mode forwards update in place.
struct ModulationState {
  Tensor gamma;
  Tensor beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  static ModulationState identity(std::size_t channels);
  std::size_t channels() const { return running_mean.size(); }
};

// x [B x C x H x W]. Training mode standardizes each channel over (B, H, W)
// and folds the batch statistics (unbiased variance) into the running
// estimates; inference mode uses the running estimates.
Tensor batch_norm2d(const Tensor& x, ModulationState& state, bool training);

}  // namespace armkit
