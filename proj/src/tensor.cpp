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

#include "armkit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace armkit {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (armkit::numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " needs " + std::to_string(armkit::numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = armkit::numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

Tensor Tensor::from_op(std::string op, Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                       BackwardFn backward) {
  Tensor out = from(std::move(shape), std::move(values));
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<detail::Node>();
  node->op = std::move(op);
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  out.impl_->requires_grad = true;
  out.impl_->node = std::move(node);
  return out;
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return armkit::numel(shape()); }

std::span<const double> Tensor::data() const {
  if (!impl_) throw ContractError("use of an undefined tensor");
  return impl_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!impl_) throw ContractError("use of an undefined tensor");
  if (impl_->node) throw ContractError("only leaf tensors may be modified (op '" + impl_->node->op + "')");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) throw DimensionError("index rank does not match " + shape_str(s));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) throw DimensionError("index out of range for " + shape_str(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

bool Tensor::is_leaf() const { return impl_ && !impl_->node; }

std::string Tensor::op() const {
  if (!impl_) return "undefined";
  return impl_->node ? impl_->node->op : "leaf";
}

Tensor Tensor::detach() const { return from(shape(), impl_->data); }

Tensor Tensor::clone() const { return from(shape(), impl_->data, requires_grad()); }

bool Gradients::contains(const Tensor& t) const { return grads_.count(t.id()) != 0; }

Tensor Gradients::of(const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) return Tensor::zeros(t.shape());
  return Tensor::from(t.shape(), it->second.grad);
}

std::span<const double> Gradients::raw(const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) throw ContractError("no gradient recorded for tensor " + shape_str(t.shape()));
  return it->second.grad;
}

Gradients backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  Gradients result;
  if (!loss.requires_grad()) return result;

  // Iterative post-order DFS; inputs are visited in declaration order so the
  // traversal (and hence accumulation order) is fixed for a given graph.
  using Impl = detail::TensorImpl;
  std::vector<const std::shared_ptr<Impl>*> order;
  std::unordered_set<const Impl*> visited;
  struct Frame {
    const std::shared_ptr<Impl>* impl;
    std::size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({&loss.impl_, 0});
  visited.insert(loss.impl_.get());
  while (!stack.empty()) {
    Frame& top = stack.back();
    const auto& node = (*top.impl)->node;
    if (node && top.next < node->inputs.size()) {
      const Tensor& in = node->inputs[top.next++];
      if (in.requires_grad() && visited.insert(in.impl_.get()).second) stack.push_back({&in.impl_, 0});
      continue;
    }
    order.push_back(top.impl);
    stack.pop_back();
  }

  std::unordered_map<const Impl*, std::vector<double>> grads;
  grads[loss.impl_.get()] = {1.0};
  std::vector<std::vector<double>*> slots;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::shared_ptr<Impl>& impl = **it;
    auto found = grads.find(impl.get());
    if (found == grads.end()) continue;
    if (!impl->node) {
      result.grads_[impl.get()] = Gradients::Entry{impl, std::move(found->second)};
      grads.erase(found);
      continue;
    }
    const auto& node = *impl->node;
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      const Tensor& in = node.inputs[i];
      if (!in.requires_grad()) continue;
      auto& g = grads[in.impl_.get()];
      if (g.empty()) g.assign(in.numel(), 0.0);
      slots[i] = &g;
    }
    const std::vector<double> grad_out = std::move(grads[impl.get()]);
    grads.erase(impl.get());
    node.backward(grad_out, slots);
  }
  return result;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

}  // namespace armkit
