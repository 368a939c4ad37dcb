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

// First-order optimizers over leaf tensors, updated in place.

#include <string>
#include <vector>

#include "armkit/tensor.hpp"

namespace armkit {

struct OptimizerSpec {
  std::string name = "adamw";  // adamw | sgd
  double lr = 3e-4;
  double weight_decay = 0.05;  // decoupled; matrices only
  double momentum = 0.9;       // sgd
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

class Optimizer {
 public:
  Optimizer(OptimizerSpec spec, std::vector<Tensor> params);

  void step(const Gradients& grads);
  long steps() const { return steps_; }

 private:
  OptimizerSpec spec_;
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long steps_ = 0;
};

}  // namespace armkit
