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

// Dense n-dimensional tensors of doubles with tape-free reverse-mode
// differentiation. Every tensor produced by an operation keeps a pointer to
// the node that created it; backward() walks those nodes in reverse
// topological order.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "armkit/errors.hpp"

namespace armkit {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;
class Gradients;
Gradients backward(const Tensor& loss);

// grad_inputs[i] is null when input i does not require a gradient; otherwise
// it points at a buffer of numel(input i) values to accumulate into.
using BackwardFn = std::function<void(std::span<const double> grad_out,
                                      std::span<std::vector<double>* const> grad_inputs)>;

namespace detail {
struct Node;
struct TensorImpl;
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  // Result of an operation. `inputs` are retained for the backward pass. When
  // no input requires a gradient (or grad mode is off) the node is dropped.
  static Tensor from_op(std::string op, Shape shape, std::vector<double> values,
                        std::vector<Tensor> inputs, BackwardFn backward);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Only leaves may be written (parameter updates, gradient probes).
  std::span<double> mutable_data();

  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  bool is_leaf() const;
  // Op tag of the producing node, or "leaf".
  std::string op() const;

  // Same values, no history.
  Tensor detach() const;
  // Deep copy of a leaf with its own storage.
  Tensor clone() const;

  const detail::TensorImpl* id() const { return impl_.get(); }

 private:
  friend class Gradients;
  friend Gradients backward(const Tensor& loss);
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;
};

namespace detail {

struct Node {
  std::string op;
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::shared_ptr<Node> node;
};

}  // namespace detail

// Gradients of a scalar with respect to every leaf that requires one.
class Gradients {
 public:
  bool contains(const Tensor& t) const;
  // Zeros when `t` was not reached.
  Tensor of(const Tensor& t) const;
  std::span<const double> raw(const Tensor& t) const;
  std::size_t size() const { return grads_.size(); }

 private:
  friend Gradients backward(const Tensor& loss);
  struct Entry {
    std::shared_ptr<detail::TensorImpl> keep;
    std::vector<double> grad;
  };
  std::unordered_map<const detail::TensorImpl*, Entry> grads_;
};

// Reverse-mode sweep from a scalar. Throws ContractError for non-scalars.
Gradients backward(const Tensor& loss);

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace armkit
