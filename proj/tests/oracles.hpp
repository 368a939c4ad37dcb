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

// Reference computations used as test oracles. Nothing here calls into the
// armkit operations it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "armkit/rng.hpp"
#include "armkit/tensor.hpp"

namespace armkit::testing {

inline Tensor random_tensor(Rng& rng, Shape shape, bool requires_grad = false, double scale = 1.0) {
  std::vector<double> v(numel(shape));
  for (double& x : v) x = rng.normal(0.0, scale);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Nested-loop depthwise cross-correlation with zero padding. `kernels` holds
// either C or B*C kernels of k*k each.
inline std::vector<double> conv_oracle(const std::vector<double>& x, std::size_t B, std::size_t C, std::size_t H,
                                       std::size_t W, const std::vector<double>& kernels, std::size_t k,
                                       bool per_sample) {
  std::vector<double> out(B * C * H * W, 0.0);
  const long r = static_cast<long>(k) / 2;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t kidx = per_sample ? b * C + c : c;
      for (long i = 0; i < static_cast<long>(H); ++i) {
        for (long j = 0; j < static_cast<long>(W); ++j) {
          long double acc = 0.0L;
          for (long di = -r; di <= r; ++di) {
            for (long dj = -r; dj <= r; ++dj) {
              const long si = i + di, sj = j + dj;
              const bool inside = si >= 0 && sj >= 0 && si < static_cast<long>(H) && sj < static_cast<long>(W);
              const double px = inside ? x[((b * C + c) * H + si) * W + sj] : 0.0;
              acc += static_cast<long double>(kernels[kidx * k * k + (di + r) * k + (dj + r)]) * px;
            }
          }
          out[((b * C + c) * H + i) * W + j] = static_cast<double>(acc);
        }
      }
    }
  }
  return out;
}

// Sum of absolute horizontal and vertical differences over rows/cols
// [margin, size - margin) of one H x W plane.
inline double total_variation(const double* plane, std::size_t H, std::size_t W, std::size_t margin) {
  double tv = 0.0;
  for (std::size_t i = margin; i + margin < H; ++i) {
    for (std::size_t j = margin; j + margin < W; ++j) {
      if (j + 1 + margin < W) tv += std::abs(plane[i * W + j + 1] - plane[i * W + j]);
      if (i + 1 + margin < H) tv += std::abs(plane[(i + 1) * W + j] - plane[i * W + j]);
    }
  }
  return tv;
}

// Held-out accuracy of a binary logistic regression on raw pixels, trained
// by full-batch gradient descent. Rows are flattened images.
inline double pixel_logistic_accuracy(const std::vector<double>& train_x, const std::vector<int>& train_y,
                                      const std::vector<double>& test_x, const std::vector<int>& test_y,
                                      std::size_t dim, int iterations = 400, double lr = 0.05) {
  std::vector<double> w(dim, 0.0), g(dim);
  double b = 0.0;
  const std::size_t n = train_y.size();
  auto score = [&](const double* x) {
    double s = b;
    for (std::size_t j = 0; j < dim; ++j) s += w[j] * x[j];
    return s;
  };
  for (int it = 0; it < iterations; ++it) {
    std::fill(g.begin(), g.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = &train_x[i * dim];
      const double err = 1.0 / (1.0 + std::exp(-score(x))) - train_y[i];
      for (std::size_t j = 0; j < dim; ++j) g[j] += err * x[j];
      gb += err;
    }
    for (std::size_t j = 0; j < dim; ++j) w[j] -= lr * g[j] / static_cast<double>(n);
    b -= lr * gb / static_cast<double>(n);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_y.size(); ++i) {
    if ((score(&test_x[i * dim]) > 0.0 ? 1 : 0) == test_y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_y.size());
}

}  // namespace armkit::testing
