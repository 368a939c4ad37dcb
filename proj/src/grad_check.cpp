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

#include "armkit/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace armkit {

namespace {

double eval_scalar(const std::function<Tensor()>& loss) {
  NoGradGuard guard;
  const Tensor value = loss();
  if (value.numel() != 1) throw ContractError("grad_check: loss must be scalar, got " + shape_str(value.shape()));
  return value.item();
}

}  // namespace

GradCheckReport grad_check_params(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                                  const GradCheckOptions& options) {
  for (const Tensor& p : params) {
    if (!p.is_leaf() || !p.requires_grad()) {
      throw ContractError("grad_check: parameters must be leaves that require gradients");
    }
  }
  GradCheckReport report;
  const Tensor value = loss();
  if (!std::isfinite(value.item())) {
    report.finite = false;
    report.diagnostic = "loss is not finite at the probe point";
    return report;
  }
  const Gradients grads = backward(value);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    const Tensor analytic = grads.of(p);
    const std::size_t n = p.numel();
    std::size_t stride = 1;
    if (options.max_probes_per_param > 0 && n > options.max_probes_per_param) {
      stride = (n + options.max_probes_per_param - 1) / options.max_probes_per_param;
    }
    for (std::size_t i = 0; i < n; i += stride) {
      auto data = p.mutable_data();
      const double original = data[i];
      data[i] = original + options.step;
      const double plus = eval_scalar(loss);
      data[i] = original - options.step;
      const double minus = eval_scalar(loss);
      data[i] = original;
      ++report.probes;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        report.finite = false;
        std::ostringstream os;
        os << "non-finite loss when perturbing param " << pi << " element " << i;
        report.diagnostic = os.str();
        report.passed = false;
        return report;
      }
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic.data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_error || report.probes == 1) {
        report.max_rel_error = rel;
        report.worst_param = pi;
        report.worst_index = i;
        report.analytic_at_worst = a;
        report.numeric_at_worst = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < options.tolerance;
  std::ostringstream os;
  os << "max relative error " << report.max_rel_error << " over " << report.probes << " probes (param "
     << report.worst_param << " element " << report.worst_index << ": analytic " << report.analytic_at_worst
     << ", numeric " << report.numeric_at_worst << ")";
  report.diagnostic = os.str();
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double step,
                           double tolerance) {
  Tensor x = Tensor::from(point.shape(), std::vector<double>(point.data().begin(), point.data().end()), true);
  GradCheckOptions options;
  options.step = step;
  options.tolerance = tolerance;
  return grad_check_params([&] { return f(x); }, {x}, options);
}

}  // namespace armkit
