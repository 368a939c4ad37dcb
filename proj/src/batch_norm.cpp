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

#include "armkit/batch_norm.hpp"

#include <cmath>
#include <string>

namespace armkit {

ModulationState ModulationState::identity(std::size_t channels) {
  ModulationState s;
  s.gamma = Tensor::full({channels}, 1.0, true);
  s.beta = Tensor::zeros({channels}, true);
  s.running_mean.assign(channels, 0.0);
  s.running_var.assign(channels, 1.0);
  return s;
}

Tensor batch_norm2d(const Tensor& x, ModulationState& state, bool training) {
  if (x.rank() != 4) throw DimensionError("batch_norm2d: expected [B x C x H x W], got " + shape_str(x.shape()));
  const std::size_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  if (state.channels() != C || state.gamma.numel() != C || state.beta.numel() != C) {
    throw DimensionError("batch_norm2d: state has " + std::to_string(state.channels()) + " channels, input " +
                         shape_str(x.shape()));
  }
  const std::size_t count = B * HW;
  if (training && count < 2) {
    throw ConfigError("batch_norm2d: training mode needs at least 2 values per channel, got " +
                      shape_str(x.shape()));
  }
  auto xd = x.data();
  auto gd = state.gamma.data();
  auto bd = state.beta.data();
  std::vector<double> mean(C, 0.0), rstd(C, 0.0);
  if (training) {
    std::vector<double> var(C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* p = xd.data() + (b * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) s += p[i];
      }
      mean[c] = s / static_cast<double>(count);
      double v = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* p = xd.data() + (b * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) v += (p[i] - mean[c]) * (p[i] - mean[c]);
      }
      var[c] = v / static_cast<double>(count);
      rstd[c] = 1.0 / std::sqrt(var[c] + state.epsilon);
      const double unbiased = v / static_cast<double>(count - 1);
      state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mean[c];
      state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      rstd[c] = 1.0 / std::sqrt(state.running_var[c] + state.epsilon);
    }
  }

  std::vector<double> xhat(x.numel()), out(x.numel());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (b * C + c) * HW;
      for (std::size_t i = 0; i < HW; ++i) {
        xhat[off + i] = (xd[off + i] - mean[c]) * rstd[c];
        out[off + i] = gd[c] * xhat[off + i] + bd[c];
      }
    }
  }
  return Tensor::from_op(
      training ? "batch_norm2d_train" : "batch_norm2d_eval", x.shape(), std::move(out),
      {x, state.gamma, state.beta},
      [gamma = state.gamma, xhat = std::move(xhat), rstd = std::move(rstd), B, C, HW, count, training](
          std::span<const double> gy, std::span<std::vector<double>* const> gi) {
        auto gd = gamma.data();
        for (std::size_t c = 0; c < C; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t b = 0; b < B; ++b) {
            const std::size_t off = (b * C + c) * HW;
            for (std::size_t i = 0; i < HW; ++i) {
              sum_g += gy[off + i];
              sum_gx += gy[off + i] * xhat[off + i];
            }
          }
          if (gi[1]) (*gi[1])[c] += sum_gx;
          if (gi[2]) (*gi[2])[c] += sum_g;
          if (!gi[0]) continue;
          const double k = gd[c] * rstd[c];
          const double mg = sum_g / static_cast<double>(count);
          const double mgx = sum_gx / static_cast<double>(count);
          for (std::size_t b = 0; b < B; ++b) {
            const std::size_t off = (b * C + c) * HW;
            for (std::size_t i = 0; i < HW; ++i) {
              (*gi[0])[off + i] += training ? k * (gy[off + i] - mg - xhat[off + i] * mgx) : k * gy[off + i];
            }
          }
        }
      });
}

}  // namespace armkit
