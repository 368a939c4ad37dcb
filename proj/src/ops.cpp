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

#include "armkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace armkit {

namespace {

bool is_suffix(const Shape& whole, const Shape& part) {
  if (part.size() > whole.size()) return false;
  return std::equal(part.rbegin(), part.rend(), whole.rbegin());
}

void require_broadcastable(const char* op, const Tensor& a, const Tensor& b) {
  if (!is_suffix(a.shape(), b.shape())) {
    throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(b.shape()) + " onto " +
                         shape_str(a.shape()));
  }
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

// Shared core for both depthwise variants; `kernel_stride` is 0 when kernels
// are shared across the batch, C*k*k when each sample has its own.
struct ConvGeometry {
  std::size_t batch, channels, height, width, k;
  std::size_t kernel_batch_stride;
};

void conv_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                  std::span<double> y) {
  const long pad = static_cast<long>(g.k / 2);
  const long H = static_cast<long>(g.height), W = static_cast<long>(g.width), K = static_cast<long>(g.k);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t c = 0; c < g.channels; ++c) {
      const double* xc = x.data() + (b * g.channels + c) * g.height * g.width;
      const double* wc = w.data() + b * g.kernel_batch_stride + c * g.k * g.k;
      double* yc = y.data() + (b * g.channels + c) * g.height * g.width;
      for (long i = 0; i < H; ++i) {
        for (long j = 0; j < W; ++j) {
          double acc = 0.0;
          for (long u = 0; u < K; ++u) {
            const long si = i + u - pad;
            if (si < 0 || si >= H) continue;
            for (long v = 0; v < K; ++v) {
              const long sj = j + v - pad;
              if (sj < 0 || sj >= W) continue;
              acc += wc[u * K + v] * xc[si * W + sj];
            }
          }
          yc[i * W + j] = acc;
        }
      }
    }
  }
}

void conv_backward(const ConvGeometry& g, std::span<const double> x, std::span<const double> w,
                   std::span<const double> gy, std::vector<double>* gx, std::vector<double>* gw) {
  const long pad = static_cast<long>(g.k / 2);
  const long H = static_cast<long>(g.height), W = static_cast<long>(g.width), K = static_cast<long>(g.k);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t c = 0; c < g.channels; ++c) {
      const std::size_t plane = (b * g.channels + c) * g.height * g.width;
      const std::size_t woff = b * g.kernel_batch_stride + c * g.k * g.k;
      const double* xc = x.data() + plane;
      const double* wc = w.data() + woff;
      const double* gyc = gy.data() + plane;
      double* gxc = gx ? gx->data() + plane : nullptr;
      double* gwc = gw ? gw->data() + woff : nullptr;
      for (long i = 0; i < H; ++i) {
        for (long j = 0; j < W; ++j) {
          const double go = gyc[i * W + j];
          if (go == 0.0) continue;
          for (long u = 0; u < K; ++u) {
            const long si = i + u - pad;
            if (si < 0 || si >= H) continue;
            for (long v = 0; v < K; ++v) {
              const long sj = j + v - pad;
              if (sj < 0 || sj >= W) continue;
              if (gxc) gxc[si * W + sj] += go * wc[u * K + v];
              if (gwc) gwc[u * K + v] += go * xc[si * W + sj];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_broadcastable("add", a, b);
  const std::size_t n = a.numel(), m = b.numel();
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] += bd[i % m];
  return Tensor::from_op("add", a.shape(), std::move(out), {a, b},
                         [n, m](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                           if (gi[0]) {
                             for (std::size_t i = 0; i < n; ++i) (*gi[0])[i] += g[i];
                           }
                           if (gi[1]) {
                             for (std::size_t i = 0; i < n; ++i) (*gi[1])[i % m] += g[i];
                           }
                         });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_broadcastable("sub", a, b);
  const std::size_t n = a.numel(), m = b.numel();
  std::vector<double> out(a.data().begin(), a.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] -= bd[i % m];
  return Tensor::from_op("sub", a.shape(), std::move(out), {a, b},
                         [n, m](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                           if (gi[0]) {
                             for (std::size_t i = 0; i < n; ++i) (*gi[0])[i] += g[i];
                           }
                           if (gi[1]) {
                             for (std::size_t i = 0; i < n; ++i) (*gi[1])[i % m] -= g[i];
                           }
                         });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_broadcastable("mul", a, b);
  const std::size_t n = a.numel(), m = b.numel();
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = ad[i] * bd[i % m];
  return Tensor::from_op("mul", a.shape(), std::move(out), {a, b},
                         [a, b, n, m](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                           auto ad = a.data();
                           auto bd = b.data();
                           if (gi[0]) {
                             for (std::size_t i = 0; i < n; ++i) (*gi[0])[i] += g[i] * bd[i % m];
                           }
                           if (gi[1]) {
                             for (std::size_t i = 0; i < n; ++i) (*gi[1])[i % m] += g[i] * ad[i];
                           }
                         });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= factor;
  return Tensor::from_op("scale", a.shape(), std::move(out), {a},
                         [factor](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * factor;
                         });
}

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  return reshape(bmm(reshape(a, {1, a.dim(0), a.dim(1)}), reshape(b, {1, b.dim(0), b.dim(1)})),
                 {a.dim(0), b.dim(1)});
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  require_rank("bmm", a, 3);
  require_rank("bmm", b, 3);
  const std::size_t G = a.dim(0), M = a.dim(1), P = a.dim(2);
  const std::size_t Q = transpose_b ? b.dim(1) : b.dim(2);
  const std::size_t bp = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != G || bp != P) {
    throw DimensionError("bmm: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         (transpose_b ? " (transposed)" : ""));
  }
  std::vector<double> out(G * M * Q, 0.0);
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t g = 0; g < G; ++g) {
    const double* A = ad.data() + g * M * P;
    const double* B = bd.data() + g * P * Q;
    double* C = out.data() + g * M * Q;
    for (std::size_t i = 0; i < M; ++i) {
      if (transpose_b) {
        for (std::size_t j = 0; j < Q; ++j) {
          double s = 0.0;
          for (std::size_t p = 0; p < P; ++p) s += A[i * P + p] * B[j * P + p];
          C[i * Q + j] = s;
        }
      } else {
        for (std::size_t p = 0; p < P; ++p) {
          const double av = A[i * P + p];
          for (std::size_t j = 0; j < Q; ++j) C[i * Q + j] += av * B[p * Q + j];
        }
      }
    }
  }
  return Tensor::from_op(
      "bmm", {G, M, Q}, std::move(out), {a, b},
      [a, b, G, M, P, Q, transpose_b](std::span<const double> gy, std::span<std::vector<double>* const> gi) {
        auto ad = a.data();
        auto bd = b.data();
        for (std::size_t g = 0; g < G; ++g) {
          const double* A = ad.data() + g * M * P;
          const double* B = bd.data() + g * P * Q;
          const double* GY = gy.data() + g * M * Q;
          if (gi[0]) {
            double* GA = gi[0]->data() + g * M * P;
            for (std::size_t i = 0; i < M; ++i) {
              for (std::size_t p = 0; p < P; ++p) {
                double s = 0.0;
                if (transpose_b) {
                  for (std::size_t j = 0; j < Q; ++j) s += GY[i * Q + j] * B[j * P + p];
                } else {
                  for (std::size_t j = 0; j < Q; ++j) s += GY[i * Q + j] * B[p * Q + j];
                }
                GA[i * P + p] += s;
              }
            }
          }
          if (gi[1]) {
            double* GB = gi[1]->data() + g * P * Q;
            for (std::size_t i = 0; i < M; ++i) {
              for (std::size_t p = 0; p < P; ++p) {
                const double av = A[i * P + p];
                if (transpose_b) {
                  for (std::size_t j = 0; j < Q; ++j) GB[j * P + p] += GY[i * Q + j] * av;
                } else {
                  for (std::size_t j = 0; j < Q; ++j) GB[p * Q + j] += GY[i * Q + j] * av;
                }
              }
            }
          }
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("linear", weight, 2);
  const std::size_t in = weight.dim(0), out_dim = weight.dim(1);
  if (x.rank() == 0 || x.shape().back() != in) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != out_dim)) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  const std::size_t rows = x.numel() / in;
  Shape shape = x.shape();
  shape.back() = out_dim;
  std::vector<double> out(rows * out_dim, 0.0);
  auto xd = x.data();
  auto wd = weight.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.data() + r * out_dim;
    if (has_bias) std::copy(bias.data().begin(), bias.data().end(), o);
    for (std::size_t k = 0; k < in; ++k) {
      const double xv = xd[r * in + k];
      const double* w = wd.data() + k * out_dim;
      for (std::size_t j = 0; j < out_dim; ++j) o[j] += xv * w[j];
    }
  }
  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return Tensor::from_op(
      "linear", std::move(shape), std::move(out), std::move(inputs),
      [x, weight, rows, in, out_dim, has_bias](std::span<const double> gy,
                                                std::span<std::vector<double>* const> gi) {
        auto xd = x.data();
        auto wd = weight.data();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = gy.data() + r * out_dim;
          if (gi[0]) {
            double* gx = gi[0]->data() + r * in;
            for (std::size_t k = 0; k < in; ++k) {
              const double* w = wd.data() + k * out_dim;
              double s = 0.0;
              for (std::size_t j = 0; j < out_dim; ++j) s += g[j] * w[j];
              gx[k] += s;
            }
          }
          if (gi[1]) {
            for (std::size_t k = 0; k < in; ++k) {
              const double xv = xd[r * in + k];
              double* gw = gi[1]->data() + k * out_dim;
              for (std::size_t j = 0; j < out_dim; ++j) gw[j] += xv * g[j];
            }
          }
          if (has_bias && gi[2]) {
            for (std::size_t j = 0; j < out_dim; ++j) (*gi[2])[j] += g[j];
          }
        }
      });
}

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() == 0) throw DimensionError("softmax_rows: scalar input");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  auto xd = x.data();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= total;
  }
  std::vector<double> saved = out;
  return Tensor::from_op("softmax_rows", x.shape(), std::move(out), {x},
                         [y = std::move(saved), n, rows](std::span<const double> gy,
                                                          std::span<std::vector<double>* const> gi) {
                           for (std::size_t r = 0; r < rows; ++r) {
                             const double* yr = y.data() + r * n;
                             const double* g = gy.data() + r * n;
                             double dot = 0.0;
                             for (std::size_t j = 0; j < n; ++j) dot += g[j] * yr[j];
                             double* gx = gi[0]->data() + r * n;
                             for (std::size_t j = 0; j < n; ++j) gx[j] += yr[j] * (g[j] - dot);
                           }
                         });
}

Tensor gelu(const Tensor& x) {
  auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = 0.5 * xd[i] * (1.0 + std::erf(xd[i] * std::numbers::sqrt2 / 2));
  return Tensor::from_op("gelu", x.shape(), std::move(out), {x},
                         [x](std::span<const double> gy, std::span<std::vector<double>* const> gi) {
                           auto xd = x.data();
                           const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
                           for (std::size_t i = 0; i < xd.size(); ++i) {
                             const double v = xd[i];
                             const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2));
                             const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
                             (*gi[0])[i] += gy[i] * (cdf + v * pdf);
                           }
                         });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t n = x.shape().back();
  if (gamma.numel() != n || beta.numel() != n) {
    throw DimensionError("layer_norm: affine " + shape_str(gamma.shape()) + " does not match " +
                         shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / n;
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  std::vector<double> xhat(x.numel()), rstd(rows), out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xd.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += in[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(n);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[r * n + j] = (in[j] - mu) * rstd[r];
      out[r * n + j] = gd[j] * xhat[r * n + j] + bd[j];
    }
  }
  return Tensor::from_op(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [gamma, xhat = std::move(xhat), rstd = std::move(rstd), n, rows](std::span<const double> gy,
                                                                        std::span<std::vector<double>* const> gi) {
        auto gd = gamma.data();
        std::vector<double> gxhat(n);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = gy.data() + r * n;
          const double* xh = xhat.data() + r * n;
          if (gi[1]) {
            for (std::size_t j = 0; j < n; ++j) (*gi[1])[j] += g[j] * xh[j];
          }
          if (gi[2]) {
            for (std::size_t j = 0; j < n; ++j) (*gi[2])[j] += g[j];
          }
          if (!gi[0]) continue;
          double mean_g = 0.0, mean_gx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            gxhat[j] = g[j] * gd[j];
            mean_g += gxhat[j];
            mean_gx += gxhat[j] * xh[j];
          }
          mean_g /= static_cast<double>(n);
          mean_gx /= static_cast<double>(n);
          double* gx = gi[0]->data() + r * n;
          for (std::size_t j = 0; j < n; ++j) gx[j] += rstd[r] * (gxhat[j] - mean_g - xh[j] * mean_gx);
        }
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::from_op("reshape", std::move(shape), std::move(out), {x},
                         [](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
                         });
}

Tensor gather(const Tensor& x, Shape shape, std::vector<std::size_t> index) {
  if (numel(shape) != index.size()) {
    throw DimensionError("gather: index count does not match " + shape_str(shape));
  }
  auto xd = x.data();
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xd.size()) throw DimensionError("gather: index out of range for " + shape_str(x.shape()));
    out[i] = xd[index[i]];
  }
  return Tensor::from_op("gather", std::move(shape), std::move(out), {x},
                         [index = std::move(index)](std::span<const double> g,
                                                    std::span<std::vector<double>* const> gi) {
                           for (std::size_t i = 0; i < index.size(); ++i) (*gi[0])[index[i]] += g[i];
                         });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const Shape& in = x.shape();
  const std::size_t rank = in.size();
  if (axes.size() != rank) throw DimensionError("permute: axes do not match " + shape_str(in));
  std::vector<bool> seen(rank, false);
  for (std::size_t a : axes) {
    if (a >= rank || seen[a]) throw DimensionError("permute: invalid axis list for " + shape_str(in));
    seen[a] = true;
  }
  Shape out(rank);
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  for (std::size_t i = 0; i < rank; ++i) out[i] = in[axes[i]];
  const std::size_t n = x.numel();
  std::vector<std::size_t> index(n);
  std::vector<std::size_t> counter(rank, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += counter[i] * in_stride[axes[i]];
    index[flat] = src;
    for (std::size_t i = rank; i-- > 0;) {
      if (++counter[i] < out[i]) break;
      counter[i] = 0;
    }
  }
  return gather(x, std::move(out), std::move(index));
}

Tensor select0(const Tensor& x, std::size_t i) {
  if (x.rank() == 0 || i >= x.dim(0)) {
    throw DimensionError("select0: index " + std::to_string(i) + " out of range for " + shape_str(x.shape()));
  }
  Shape out(x.shape().begin() + 1, x.shape().end());
  const std::size_t block = numel(out);
  std::vector<std::size_t> index(block);
  std::iota(index.begin(), index.end(), i * block);
  return gather(x, std::move(out), std::move(index));
}

Tensor roll_hw(const Tensor& x, long shift_h, long shift_w) {
  require_rank("roll_hw", x, 4);
  const long B = static_cast<long>(x.dim(0)), H = static_cast<long>(x.dim(1)), W = static_cast<long>(x.dim(2)),
             C = static_cast<long>(x.dim(3));
  std::vector<std::size_t> index(x.numel());
  std::size_t flat = 0;
  for (long b = 0; b < B; ++b) {
    for (long h = 0; h < H; ++h) {
      const long sh = ((h - shift_h) % H + H) % H;
      for (long w = 0; w < W; ++w) {
        const long sw = ((w - shift_w) % W + W) % W;
        for (long c = 0; c < C; ++c) index[flat++] = static_cast<std::size_t>(((b * H + sh) * W + sw) * C + c);
      }
    }
  }
  return gather(x, x.shape(), std::move(index));
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  const std::size_t n = x.numel();
  return Tensor::from_op("sum", {}, {s}, {x},
                         [n](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                           for (std::size_t i = 0; i < n; ++i) (*gi[0])[i] += g[0];
                         });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  const Shape& in = x.shape();
  if (axis >= in.size()) throw DimensionError("mean_axis: axis out of range for " + shape_str(in));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
  for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
  const std::size_t len = in[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (i != axis) out_shape.push_back(in[i]);
  }
  auto xd = x.data();
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t l = 0; l < len; ++l) {
      const double* src = xd.data() + (o * len + l) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t j = 0; j < inner; ++j) dst[j] += src[j];
    }
  }
  const double inv = 1.0 / static_cast<double>(len);
  for (double& v : out) v *= inv;
  return Tensor::from_op("mean_axis", std::move(out_shape), std::move(out), {x},
                         [outer, inner, len, inv](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                           for (std::size_t o = 0; o < outer; ++o) {
                             for (std::size_t l = 0; l < len; ++l) {
                               double* dst = gi[0]->data() + (o * len + l) * inner;
                               const double* src = g.data() + o * inner;
                               for (std::size_t j = 0; j < inner; ++j) dst[j] += src[j] * inv;
                             }
                           }
                         });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank("cross_entropy", logits, 2);
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  if (labels.size() != B) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_str(logits.shape()));
  }
  auto ld = logits.data();
  std::vector<double> probs(B * K);
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= K) {
      throw DimensionError("cross_entropy: label " + std::to_string(labels[b]) + " out of range");
    }
    const double* row = ld.data() + b * K;
    const double mx = *std::max_element(row, row + K);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) total += std::exp(row[k] - mx);
    const double log_total = std::log(total) + mx;
    for (std::size_t k = 0; k < K; ++k) probs[b * K + k] = std::exp(row[k] - log_total);
    loss += log_total - row[labels[b]];
  }
  loss /= static_cast<double>(B);
  std::vector<int> targets(labels.begin(), labels.end());
  return Tensor::from_op("cross_entropy", {}, {loss}, {logits},
                         [probs = std::move(probs), targets = std::move(targets), B, K](
                             std::span<const double> g, std::span<std::vector<double>* const> gi) {
                           const double s = g[0] / static_cast<double>(B);
                           for (std::size_t b = 0; b < B; ++b) {
                             for (std::size_t k = 0; k < K; ++k) {
                               const double onehot = static_cast<int>(k) == targets[b] ? 1.0 : 0.0;
                               (*gi[0])[b * K + k] += s * (probs[b * K + k] - onehot);
                             }
                           }
                         });
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& kernels) {
  require_rank("depthwise_conv2d", x, 4);
  require_rank("depthwise_conv2d", kernels, 3);
  const std::size_t k = kernels.dim(1);
  if (kernels.dim(2) != k || k % 2 == 0) {
    throw ConfigError("depthwise_conv2d: kernels must be square with odd size, got " +
                      shape_str(kernels.shape()));
  }
  if (kernels.dim(0) != x.dim(1)) {
    throw DimensionError("depthwise_conv2d: " + std::to_string(kernels.dim(0)) + " kernels for input " +
                         shape_str(x.shape()));
  }
  const ConvGeometry geo{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k, 0};
  std::vector<double> out(x.numel());
  conv_forward(geo, x.data(), kernels.data(), out);
  return Tensor::from_op("depthwise_conv2d", x.shape(), std::move(out), {x, kernels},
                         [x, kernels, geo](std::span<const double> gy, std::span<std::vector<double>* const> gi) {
                           conv_backward(geo, x.data(), kernels.data(), gy, gi[0], gi[1]);
                         });
}

Tensor depthwise_conv2d_batched(const Tensor& x, const Tensor& kernels) {
  require_rank("depthwise_conv2d_batched", x, 4);
  require_rank("depthwise_conv2d_batched", kernels, 4);
  const std::size_t k = kernels.dim(2);
  if (kernels.dim(3) != k || k % 2 == 0) {
    throw ConfigError("depthwise_conv2d_batched: kernels must be square with odd size, got " +
                      shape_str(kernels.shape()));
  }
  if (kernels.dim(0) != x.dim(0) || kernels.dim(1) != x.dim(1)) {
    throw DimensionError("depthwise_conv2d_batched: kernels " + shape_str(kernels.shape()) +
                         " do not match input " + shape_str(x.shape()));
  }
  const ConvGeometry geo{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k, x.dim(1) * k * k};
  std::vector<double> out(x.numel());
  conv_forward(geo, x.data(), kernels.data(), out);
  return Tensor::from_op("depthwise_conv2d_batched", x.shape(), std::move(out), {x, kernels},
                         [x, kernels, geo](std::span<const double> gy, std::span<std::vector<double>* const> gi) {
                           conv_backward(geo, x.data(), kernels.data(), gy, gi[0], gi[1]);
                         });
}

}  // namespace armkit
