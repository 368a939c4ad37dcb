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
#include <functional>
#include <string>
#include <vector>

#include "armkit/tensor.hpp"

namespace armkit {

struct GradCheckReport {
  double max_rel_error = 0.0;
  // Parameter and flat element where the worst discrepancy occurred.
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t probes = 0;
  bool finite = true;
  bool passed = false;
  std::string diagnostic;
};

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-4;
  // Discrepancies are divided by max(|analytic|, |numeric|, floor).
  double floor = 1e-4;
  // Probe at most this many elements per parameter (evenly strided); 0 = all.
  std::size_t max_probes_per_param = 0;
};

// Compares backward() against central differences of a scalar-valued `loss`
// with respect to every tensor in `params`. The params must be leaves that
// require gradients; they are perturbed in place and restored.
GradCheckReport grad_check_params(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                                  const GradCheckOptions& options = {});

// Single-input form: `f` maps a point to a scalar.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double step,
                           double tolerance);

}  // namespace armkit
