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

#include "armkit/optim.hpp"

#include <cmath>

#include "armkit/errors.hpp"

namespace armkit {

void OptimizerSpec::validate() const {
  if (name != "adamw" && name != "sgd") throw ConfigError("optimizer.name: expected adamw | sgd, got '" + name + "'");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("optimizer.lr: must be positive");
  if (weight_decay < 0.0) throw ConfigError("optimizer.weight_decay: must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("optimizer.momentum: must be in [0, 1)");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw ConfigError("optimizer.beta1/beta2: must be in [0, 1)");
  }
}

Optimizer::Optimizer(OptimizerSpec spec, std::vector<Tensor> params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  for (const Tensor& p : params_) {
    if (!p.is_leaf()) throw ContractError("optimizer: parameters must be leaf tensors");
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(spec_.name == "adamw" ? p.numel() : 0, 0.0);
  }
}

void Optimizer::step(const Gradients& grads) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!grads.contains(p)) continue;
    const auto g = grads.raw(p);
    auto w = p.mutable_data();
    const bool decay = p.rank() >= 2 && spec_.weight_decay > 0.0;
    auto& m = m_[i];
    if (spec_.name == "sgd") {
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double gj = g[j] + (decay ? spec_.weight_decay * w[j] : 0.0);
        m[j] = spec_.momentum * m[j] + gj;
        w[j] -= spec_.lr * m[j];
      }
      continue;
    }
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = spec_.beta1 * m[j] + (1.0 - spec_.beta1) * g[j];
      v[j] = spec_.beta2 * v[j] + (1.0 - spec_.beta2) * g[j] * g[j];
      if (decay) w[j] -= spec_.lr * spec_.weight_decay * w[j];
      w[j] -= spec_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + spec_.epsilon);
    }
  }
}

}  // namespace armkit
