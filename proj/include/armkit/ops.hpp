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

// Differentiable operations on armkit::Tensor. All arithmetic is in double
// precision. Convolutions follow the cross-correlation convention with zero
// padding to "same" output size.

#include <cstddef>
#include <span>
#include <vector>

#include "armkit/tensor.hpp"

namespace armkit {

// Elementwise; `b` may equal `a`'s shape or a trailing suffix of it (bias and
// positional-embedding broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor square(const Tensor& a);

// [m x p] . [p x q]
Tensor matmul(const Tensor& a, const Tensor& b);
// Batched: [G x m x p] . [G x p x q], or [G x m x p] . [G x q x p]^T.
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);
// x[..., in] . weight[in x out] (+ bias[out]).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Softmax along the last axis with max subtraction.
Tensor softmax_rows(const Tensor& x);
Tensor gelu(const Tensor& x);
// Normalizes over the last axis then applies gamma/beta of that length.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
// out.flat[i] = x.flat[index[i]]
Tensor gather(const Tensor& x, Shape shape, std::vector<std::size_t> index);
// Slice i along axis 0, dropping that axis.
Tensor select0(const Tensor& x, std::size_t i);
// Circular shift of axes 1 and 2 of a [B x H x W x C] tensor.
Tensor roll_hw(const Tensor& x, long shift_h, long shift_w);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Mean over one axis, which is removed from the result.
Tensor mean_axis(const Tensor& x, std::size_t axis);

// Mean cross-entropy of logits [B x K] against integer labels.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

// x [B x C x H x W], kernels [C x k x k], k odd. Channel c of the output is
// the cross-correlation of channel c of x with kernels[c].
Tensor depthwise_conv2d(const Tensor& x, const Tensor& kernels);
// Same, with a separate kernel per (sample, channel): kernels [B x C x k x k].
Tensor depthwise_conv2d_batched(const Tensor& x, const Tensor& kernels);

}  // namespace armkit
