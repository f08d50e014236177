// Copyright 2026 The DGR Lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dgr/ops.hpp"

#include <algorithm>
#include <cmath>

namespace dgr {

namespace detail {

template <typename Scalar>
double stable_sum(const Scalar* data, Index n) {
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) acc += static_cast<double>(data[i]);
  return acc;
}

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": rank mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) {
      throw ShapeError(std::string(op) + ": dimension " + std::to_string(i) + " differs (" +
                       std::to_string(a[i]) + " vs " + std::to_string(b[i]) + ") in " +
                       shape_str(a) + " vs " + shape_str(b));
    }
  }
}

void require_rank(const char* op, const Shape& s, int rank) {
  if (static_cast<int>(s.size()) != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(s));
  }
}

template double stable_sum(const float*, Index);
template double stable_sum(const double*, Index);

}  // namespace detail

namespace {

using detail::Node;

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MapMat = Eigen::Map<RowMat<Scalar>>;
template <typename Scalar>
using CMapMat = Eigen::Map<const RowMat<Scalar>>;

template <typename Scalar>
Buffer<Scalar>* grad_of(Node<Scalar>& out, std::size_t i) {
  auto& p = *out.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

struct ConvGeometry {
  Index batch, channels, height, width, out_channels, k, stride, pad, out_h, out_w;
};

// Output columns [lo, hi) whose input column ow * stride - pad + kj is inside the image.
inline std::pair<Index, Index> valid_cols(const ConvGeometry& g, Index kj) {
  Index lo = 0;
  while (lo < g.out_w && lo * g.stride - g.pad + kj < 0) ++lo;
  Index hi = g.out_w;
  while (hi > lo && (hi - 1) * g.stride - g.pad + kj >= g.width) --hi;
  return {lo, hi};
}

// Unfolds output rows [oh0, oh1) of one image into a (C*k*k) x ((oh1-oh0)*out_w) matrix.
template <typename Scalar>
void im2col(const Scalar* img, const ConvGeometry& g, Index oh0, Index oh1, Scalar* col) {
  const Index n = (oh1 - oh0) * g.out_w;
  for (Index c = 0; c < g.channels; ++c) {
    const Scalar* src = img + c * g.height * g.width;
    for (Index ki = 0; ki < g.k; ++ki) {
      for (Index kj = 0; kj < g.k; ++kj) {
        Scalar* row = col + ((c * g.k + ki) * g.k + kj) * n;
        const auto [lo, hi] = valid_cols(g, kj);
        for (Index oh = oh0; oh < oh1; ++oh) {
          const Index ih = oh * g.stride - g.pad + ki;
          Scalar* dst = row + (oh - oh0) * g.out_w;
          if (ih < 0 || ih >= g.height) {
            std::fill(dst, dst + g.out_w, Scalar(0));
            continue;
          }
          std::fill(dst, dst + lo, Scalar(0));
          std::fill(dst + hi, dst + g.out_w, Scalar(0));
          const Scalar* line = src + ih * g.width - g.pad + kj;
          if (g.stride == 1) {
            std::copy(line + lo, line + hi, dst + lo);
          } else {
            for (Index ow = lo; ow < hi; ++ow) dst[ow] = line[ow * g.stride];
          }
        }
      }
    }
  }
}

// Adjoint of im2col over the same row range; accumulates into img.
template <typename Scalar>
void col2im(const Scalar* col, const ConvGeometry& g, Index oh0, Index oh1, Scalar* img) {
  const Index n = (oh1 - oh0) * g.out_w;
  for (Index c = 0; c < g.channels; ++c) {
    Scalar* dst = img + c * g.height * g.width;
    for (Index ki = 0; ki < g.k; ++ki) {
      for (Index kj = 0; kj < g.k; ++kj) {
        const Scalar* row = col + ((c * g.k + ki) * g.k + kj) * n;
        const auto [lo, hi] = valid_cols(g, kj);
        for (Index oh = oh0; oh < oh1; ++oh) {
          const Index ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.height) continue;
          Scalar* line = dst + ih * g.width - g.pad + kj;
          const Scalar* src = row + (oh - oh0) * g.out_w;
          if (g.stride == 1) {
            for (Index ow = lo; ow < hi; ++ow) line[ow] += src[ow];
          } else {
            for (Index ow = lo; ow < hi; ++ow) line[ow * g.stride] += src[ow];
          }
        }
      }
    }
  }
}

// Output rows per im2col block, sized so one block stays cache resident.
inline Index block_rows(const ConvGeometry& g) {
  const Index ckk = g.channels * g.k * g.k;
  const Index target_cols = std::max<Index>(64, (Index(1) << 18) / std::max<Index>(ckk, 1));
  return std::clamp<Index>(target_cols / g.out_w, 1, g.out_h);
}

template <typename Scalar, typename Fwd, typename Deriv>
Tensor<Scalar> unary(const char* op, const Tensor<Scalar>& x, Fwd fwd, Deriv deriv) {
  Buffer<Scalar> value = x.data().unaryExpr(fwd);
  return make_result<Scalar>(op, x.shape(), std::move(value), {x},
                             [deriv](Node<Scalar>& out) {
                               if (auto* g = grad_of(out, 0)) {
                                 const auto& in = out.parents[0]->value;
                                 for (Index i = 0; i < in.size(); ++i)
                                   (*g)[i] += out.grad[i] * deriv(in[i], out.value[i]);
                               }
                             });
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                      const Tensor<Scalar>& bias, Index stride, Index padding) {
  detail::require_rank("conv2d input", input.shape(), 4);
  detail::require_rank("conv2d kernel", kernel.shape(), 4);
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                 kernel.dim(0), kernel.dim(2), stride, padding, 0, 0};
  if (kernel.dim(1) != g.channels) {
    throw ShapeError("conv2d: kernel dimension 1 (in channels) is " +
                     std::to_string(kernel.dim(1)) + " but input dimension 1 is " +
                     std::to_string(g.channels));
  }
  if (kernel.dim(2) != kernel.dim(3)) throw ShapeError("conv2d: kernel must be square");
  // Even kernels have no centre; they are accepted only without padding.
  if (g.k % 2 == 0 && padding != 0) throw ShapeError("conv2d: padded kernels must have odd size");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.out_channels)) {
    throw ShapeError("conv2d: bias dimension 0 must equal out channels " +
                     std::to_string(g.out_channels));
  }
  g.out_h = (g.height + 2 * padding - g.k) / stride + 1;
  g.out_w = (g.width + 2 * padding - g.k) / stride + 1;
  if (g.out_h <= 0 || g.out_w <= 0) throw ShapeError("conv2d: kernel larger than padded input");

  const Index ckk = g.channels * g.k * g.k;
  const Index plane = g.out_h * g.out_w;
  const Index in_stride = g.channels * g.height * g.width;
  Buffer<Scalar> value(g.batch * g.out_channels * plane);
  const Index rows = block_rows(g);
  RowMat<Scalar> col(ckk, rows * g.out_w);
  CMapMat<Scalar> w(kernel.data().data(), g.out_channels, ckk);
  for (Index b = 0; b < g.batch; ++b) {
    MapMat<Scalar> out(value.data() + b * g.out_channels * plane, g.out_channels, plane);
    for (Index oh0 = 0; oh0 < g.out_h; oh0 += rows) {
      const Index oh1 = std::min(g.out_h, oh0 + rows), n = (oh1 - oh0) * g.out_w;
      im2col(input.data().data() + b * in_stride, g, oh0, oh1, col.data());
      out.middleCols(oh0 * g.out_w, n).noalias() = w * MapMat<Scalar>(col.data(), ckk, n);
    }
    if (bias.defined()) out.colwise() += bias.data().matrix();
  }

  return make_result<Scalar>(
      "conv2d", Shape{g.batch, g.out_channels, g.out_h, g.out_w}, std::move(value),
      {input, kernel, bias}, [g, ckk, plane, in_stride](Node<Scalar>& out) {
        auto& x = *out.parents[0];
        auto& k = *out.parents[1];
        auto* gx = grad_of(out, 0);
        auto* gk = grad_of(out, 1);
        auto* gb = grad_of(out, 2);
        CMapMat<Scalar> w(k.value.data(), g.out_channels, ckk);
        const Index rows = block_rows(g);
        RowMat<Scalar> col(ckk, rows * g.out_w);
        RowMat<Scalar> dcol(ckk, rows * g.out_w);
        for (Index b = 0; b < g.batch; ++b) {
          CMapMat<Scalar> dout(out.grad.data() + b * g.out_channels * plane, g.out_channels,
                               plane);
          if (gb) gb->matrix() += dout.rowwise().sum();
          for (Index oh0 = 0; oh0 < g.out_h; oh0 += rows) {
            const Index oh1 = std::min(g.out_h, oh0 + rows), n = (oh1 - oh0) * g.out_w;
            const auto dblock = dout.middleCols(oh0 * g.out_w, n);
            if (gk) {
              im2col(x.value.data() + b * in_stride, g, oh0, oh1, col.data());
              MapMat<Scalar>(gk->data(), g.out_channels, ckk).noalias() +=
                  dblock * MapMat<Scalar>(col.data(), ckk, n).transpose();
            }
            if (gx) {
              MapMat<Scalar>(dcol.data(), ckk, n).noalias() = w.transpose() * dblock;
              col2im(dcol.data(), g, oh0, oh1, gx->data() + b * in_stride);
            }
          }
        }
      });
}

template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& x, Scalar slope) {
  if (!(slope > 0 && slope < 1)) throw std::invalid_argument("leaky_relu: slope must be in (0,1)");
  return unary(
      "leaky_relu", x, [slope](Scalar v) { return v > 0 ? v : slope * v; },
      [slope](Scalar v, Scalar) { return v > 0 ? Scalar(1) : slope; });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  return unary(
      "sigmoid", x,
      [](Scalar v) {
        return v >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-v))
                      : std::exp(v) / (Scalar(1) + std::exp(v));
      },
      [](Scalar, Scalar y) { return y * (Scalar(1) - y); });
}

template <typename Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& x) {
  return unary(
      "tanh", x, [](Scalar v) { return std::tanh(v); },
      [](Scalar, Scalar y) { return Scalar(1) - y * y; });
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape("add", a.shape(), b.shape());
  return make_result<Scalar>("add", a.shape(), a.data() + b.data(), {a, b},
                             [](Node<Scalar>& out) {
                               if (auto* g = grad_of(out, 0)) *g += out.grad;
                               if (auto* g = grad_of(out, 1)) *g += out.grad;
                             });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape("sub", a.shape(), b.shape());
  return make_result<Scalar>("sub", a.shape(), a.data() - b.data(), {a, b},
                             [](Node<Scalar>& out) {
                               if (auto* g = grad_of(out, 0)) *g += out.grad;
                               if (auto* g = grad_of(out, 1)) *g -= out.grad;
                             });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape("mul", a.shape(), b.shape());
  return make_result<Scalar>("mul", a.shape(), a.data() * b.data(), {a, b},
                             [](Node<Scalar>& out) {
                               if (auto* g = grad_of(out, 0)) *g += out.grad * out.parents[1]->value;
                               if (auto* g = grad_of(out, 1)) *g += out.grad * out.parents[0]->value;
                             });
}

template <typename Scalar>
Tensor<Scalar> affine(const Tensor<Scalar>& x, Scalar a, Scalar b) {
  return make_result<Scalar>("affine", x.shape(), a * x.data() + b, {x},
                             [a](Node<Scalar>& out) {
                               if (auto* g = grad_of(out, 0)) *g += a * out.grad;
                             });
}

template <typename Scalar>
Tensor<Scalar> abs(const Tensor<Scalar>& x) {
  return unary(
      "abs", x, [](Scalar v) { return std::abs(v); },
      [](Scalar v, Scalar) { return Scalar((v > 0) - (v < 0)); });
}

template <typename Scalar>
Tensor<Scalar> log_clamped(const Tensor<Scalar>& x, Scalar floor) {
  return unary(
      "log", x, [floor](Scalar v) { return std::log(std::max(v, floor)); },
      [floor](Scalar v, Scalar) { return v > floor ? Scalar(1) / v : Scalar(0); });
}

template <typename Scalar>
Tensor<Scalar> clamp(const Tensor<Scalar>& x, Scalar lo, Scalar hi) {
  return unary(
      "clamp", x, [lo, hi](Scalar v) { return std::clamp(v, lo, hi); },
      [lo, hi](Scalar v, Scalar) { return (v >= lo && v <= hi) ? Scalar(1) : Scalar(0); });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x) {
  const Index n = x.size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  const double s = detail::stable_sum(x.data().data(), n) / static_cast<double>(n);
  return make_result<Scalar>("mean", Shape{1}, Buffer<Scalar>::Constant(1, static_cast<Scalar>(s)),
                             {x}, [n](Node<Scalar>& out) {
                               if (auto* g = grad_of(out, 0))
                                 *g += out.grad[0] / static_cast<Scalar>(n);
                             });
}

template <typename Scalar>
Tensor<Scalar> l1_mean(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape("l1_mean", a.shape(), b.shape());
  const Index n = a.size();
  if (n == 0) throw ShapeError("l1_mean: empty tensor");
  double s = 0.0;
  for (Index i = 0; i < n; ++i) s += std::abs(static_cast<double>(a.data()[i]) - b.data()[i]);
  s /= static_cast<double>(n);
  return make_result<Scalar>(
      "l1_mean", Shape{1}, Buffer<Scalar>::Constant(1, static_cast<Scalar>(s)), {a, b},
      [n](Node<Scalar>& out) {
        const auto& av = out.parents[0]->value;
        const auto& bv = out.parents[1]->value;
        const Scalar g0 = out.grad[0] / static_cast<Scalar>(n);
        auto* ga = grad_of(out, 0);
        auto* gb = grad_of(out, 1);
        for (Index i = 0; i < n; ++i) {
          const Scalar d = av[i] - bv[i];
          const Scalar s = g0 * Scalar((d > 0) - (d < 0));
          if (ga) (*ga)[i] += s;
          if (gb) (*gb)[i] -= s;
        }
      });
}

template <typename Scalar>
Tensor<Scalar> sq_mean(const Tensor<Scalar>& a) {
  const Index n = a.size();
  if (n == 0) throw ShapeError("sq_mean: empty tensor");
  double s = 0.0;
  for (Index i = 0; i < n; ++i) s += static_cast<double>(a.data()[i]) * a.data()[i];
  s /= static_cast<double>(n);
  return make_result<Scalar>("sq_mean", Shape{1},
                             Buffer<Scalar>::Constant(1, static_cast<Scalar>(s)), {a},
                             [n](Node<Scalar>& out) {
                               if (auto* g = grad_of(out, 0))
                                 *g += (Scalar(2) * out.grad[0] / static_cast<Scalar>(n)) *
                                       out.parents[0]->value;
                             });
}

template <typename Scalar>
Tensor<Scalar> weighted_sum(const std::vector<std::pair<Scalar, Tensor<Scalar>>>& terms) {
  std::vector<Scalar> weights;
  std::vector<Tensor<Scalar>> inputs;
  double s = 0.0;
  for (const auto& [w, t] : terms) {
    if (!t.defined()) continue;
    if (t.size() != 1) throw ShapeError("weighted_sum: terms must be scalars, got " + shape_str(t.shape()));
    weights.push_back(w);
    inputs.push_back(t);
    s += static_cast<double>(w) * t.item();
  }
  return make_result<Scalar>("weighted_sum", Shape{1},
                             Buffer<Scalar>::Constant(1, static_cast<Scalar>(s)), inputs,
                             [weights](Node<Scalar>& out) {
                               for (std::size_t i = 0; i < weights.size(); ++i)
                                 if (auto* g = grad_of(out, i)) (*g)[0] += weights[i] * out.grad[0];
                             });
}

template <typename Scalar>
Tensor<Scalar> instance_norm(const Tensor<Scalar>& x, Scalar eps) {
  detail::require_rank("instance_norm", x.shape(), 4);
  const Index groups = x.dim(0) * x.dim(1);
  const Index hw = x.dim(2) * x.dim(3);
  Buffer<Scalar> value(x.size());
  Buffer<Scalar> inv_std(groups);
  for (Index gidx = 0; gidx < groups; ++gidx) {
    const Scalar* src = x.data().data() + gidx * hw;
    const double mu = detail::stable_sum(src, hw) / static_cast<double>(hw);
    double var = 0.0;
    for (Index i = 0; i < hw; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<double>(hw);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[gidx] = static_cast<Scalar>(is);
    for (Index i = 0; i < hw; ++i) value[gidx * hw + i] = static_cast<Scalar>((src[i] - mu) * is);
  }
  return make_result<Scalar>(
      "instance_norm", x.shape(), std::move(value), {x},
      [groups, hw, inv_std](Node<Scalar>& out) {
        auto* g = grad_of(out, 0);
        if (!g) return;
        for (Index gidx = 0; gidx < groups; ++gidx) {
          const Scalar* dy = out.grad.data() + gidx * hw;
          const Scalar* y = out.value.data() + gidx * hw;
          double mean_dy = 0.0, mean_dy_y = 0.0;
          for (Index i = 0; i < hw; ++i) {
            mean_dy += dy[i];
            mean_dy_y += static_cast<double>(dy[i]) * y[i];
          }
          mean_dy /= static_cast<double>(hw);
          mean_dy_y /= static_cast<double>(hw);
          Scalar* dx = g->data() + gidx * hw;
          for (Index i = 0; i < hw; ++i)
            dx[i] += static_cast<Scalar>(inv_std[gidx] * (dy[i] - mean_dy - y[i] * mean_dy_y));
        }
      });
}

template <typename Scalar>
Tensor<Scalar> upsample_nearest2x(const Tensor<Scalar>& x) {
  detail::require_rank("upsample_nearest2x", x.shape(), 4);
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Buffer<Scalar> value(planes * 4 * h * w);
  for (Index p = 0; p < planes; ++p)
    for (Index i = 0; i < 2 * h; ++i)
      for (Index j = 0; j < 2 * w; ++j)
        value[(p * 2 * h + i) * 2 * w + j] = x.data()[(p * h + i / 2) * w + j / 2];
  return make_result<Scalar>("upsample_nearest2x", Shape{x.dim(0), x.dim(1), 2 * h, 2 * w},
                             std::move(value), {x}, [planes, h, w](Node<Scalar>& out) {
                               auto* g = grad_of(out, 0);
                               if (!g) return;
                               for (Index p = 0; p < planes; ++p)
                                 for (Index i = 0; i < 2 * h; ++i)
                                   for (Index j = 0; j < 2 * w; ++j)
                                     (*g)[(p * h + i / 2) * w + j / 2] +=
                                         out.grad[(p * 2 * h + i) * 2 * w + j];
                             });
}

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_rank("concat_channels", a.shape(), 4);
  detail::require_rank("concat_channels", b.shape(), 4);
  for (int d : {0, 2, 3}) {
    if (a.dim(d) != b.dim(d)) {
      throw ShapeError("concat_channels: dimension " + std::to_string(d) + " differs (" +
                       std::to_string(a.dim(d)) + " vs " + std::to_string(b.dim(d)) + ")");
    }
  }
  const Index batch = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  Buffer<Scalar> value(batch * (ca + cb) * hw);
  for (Index n = 0; n < batch; ++n) {
    value.segment(n * (ca + cb) * hw, ca * hw) = a.data().segment(n * ca * hw, ca * hw);
    value.segment((n * (ca + cb) + ca) * hw, cb * hw) = b.data().segment(n * cb * hw, cb * hw);
  }
  return make_result<Scalar>(
      "concat_channels", Shape{batch, ca + cb, a.dim(2), a.dim(3)}, std::move(value), {a, b},
      [batch, ca, cb, hw](Node<Scalar>& out) {
        auto* ga = grad_of(out, 0);
        auto* gb = grad_of(out, 1);
        for (Index n = 0; n < batch; ++n) {
          if (ga) ga->segment(n * ca * hw, ca * hw) += out.grad.segment(n * (ca + cb) * hw, ca * hw);
          if (gb)
            gb->segment(n * cb * hw, cb * hw) += out.grad.segment((n * (ca + cb) + ca) * hw, cb * hw);
        }
      });
}

template <typename Scalar>
Tensor<Scalar> grid_sample(const Tensor<Scalar>& input, const Tensor<Scalar>& field) {
  detail::require_rank("grid_sample input", input.shape(), 4);
  detail::require_rank("grid_sample field", field.shape(), 4);
  const Index batch = input.dim(0), channels = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (field.dim(0) != batch)
    throw ShapeError("grid_sample: field dimension 0 (batch) is " + std::to_string(field.dim(0)) +
                     ", input has " + std::to_string(batch));
  if (field.dim(1) != 2)
    throw ShapeError("grid_sample: field dimension 1 must be 2, got " + std::to_string(field.dim(1)));
  if (field.dim(2) != h || field.dim(3) != w)
    throw ShapeError("grid_sample: field spatial size " + shape_str(field.shape()) +
                     " does not match input " + shape_str(input.shape()));

  const Index hw = h * w;
  Buffer<Scalar> value(input.size());
  const Scalar* in = input.data().data();
  const Scalar* fl = field.data().data();
  for (Index b = 0; b < batch; ++b) {
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j < w; ++j) {
        const Index p = i * w + j;
        const Scalar yc = std::clamp(Scalar(i) + fl[(b * 2) * hw + p], Scalar(0), Scalar(h - 1));
        const Scalar xc = std::clamp(Scalar(j) + fl[(b * 2 + 1) * hw + p], Scalar(0), Scalar(w - 1));
        const Index y0 = std::min(static_cast<Index>(std::floor(yc)), h - 1);
        const Index x0 = std::min(static_cast<Index>(std::floor(xc)), w - 1);
        const Index y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
        const Scalar wy = yc - Scalar(y0), wx = xc - Scalar(x0);
        for (Index c = 0; c < channels; ++c) {
          const Scalar* src = in + (b * channels + c) * hw;
          value[(b * channels + c) * hw + p] =
              (Scalar(1) - wy) * ((Scalar(1) - wx) * src[y0 * w + x0] + wx * src[y0 * w + x1]) +
              wy * ((Scalar(1) - wx) * src[y1 * w + x0] + wx * src[y1 * w + x1]);
        }
      }
    }
  }

  return make_result<Scalar>(
      "grid_sample", input.shape(), std::move(value), {input, field},
      [batch, channels, h, w, hw](Node<Scalar>& out) {
        const Scalar* in = out.parents[0]->value.data();
        const Scalar* fl = out.parents[1]->value.data();
        auto* gin = grad_of(out, 0);
        auto* gfl = grad_of(out, 1);
        for (Index b = 0; b < batch; ++b) {
          for (Index i = 0; i < h; ++i) {
            for (Index j = 0; j < w; ++j) {
              const Index p = i * w + j;
              const Scalar yr = Scalar(i) + fl[(b * 2) * hw + p];
              const Scalar xr = Scalar(j) + fl[(b * 2 + 1) * hw + p];
              const bool y_inside = yr >= Scalar(0) && yr <= Scalar(h - 1);
              const bool x_inside = xr >= Scalar(0) && xr <= Scalar(w - 1);
              const Scalar yc = std::clamp(yr, Scalar(0), Scalar(h - 1));
              const Scalar xc = std::clamp(xr, Scalar(0), Scalar(w - 1));
              const Index y0 = std::min(static_cast<Index>(std::floor(yc)), h - 1);
              const Index x0 = std::min(static_cast<Index>(std::floor(xc)), w - 1);
              const Index y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
              const Scalar wy = yc - Scalar(y0), wx = xc - Scalar(x0);
              Scalar dy = 0, dx = 0;
              for (Index c = 0; c < channels; ++c) {
                const Scalar go = out.grad[(b * channels + c) * hw + p];
                const Index base = (b * channels + c) * hw;
                if (gin) {
                  (*gin)[base + y0 * w + x0] += go * (Scalar(1) - wy) * (Scalar(1) - wx);
                  (*gin)[base + y0 * w + x1] += go * (Scalar(1) - wy) * wx;
                  (*gin)[base + y1 * w + x0] += go * wy * (Scalar(1) - wx);
                  (*gin)[base + y1 * w + x1] += go * wy * wx;
                }
                if (gfl) {
                  const Scalar* src = in + base;
                  const Scalar v00 = src[y0 * w + x0], v01 = src[y0 * w + x1];
                  const Scalar v10 = src[y1 * w + x0], v11 = src[y1 * w + x1];
                  dy += go * ((Scalar(1) - wx) * (v10 - v00) + wx * (v11 - v01));
                  dx += go * ((Scalar(1) - wy) * (v01 - v00) + wy * (v11 - v10));
                }
              }
              if (gfl) {
                if (y_inside) (*gfl)[(b * 2) * hw + p] += dy;
                if (x_inside) (*gfl)[(b * 2 + 1) * hw + p] += dx;
              }
            }
          }
        }
      });
}

#define DGR_INSTANTIATE_OPS(S)                                                                 \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, Index, Index); \
  template Tensor<S> leaky_relu(const Tensor<S>&, S);                                          \
  template Tensor<S> sigmoid(const Tensor<S>&);                                                \
  template Tensor<S> tanh(const Tensor<S>&);                                                   \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                  \
  template Tensor<S> sub(const Tensor<S>&, const Tensor<S>&);                                  \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                                  \
  template Tensor<S> affine(const Tensor<S>&, S, S);                                           \
  template Tensor<S> abs(const Tensor<S>&);                                                    \
  template Tensor<S> log_clamped(const Tensor<S>&, S);                                         \
  template Tensor<S> clamp(const Tensor<S>&, S, S);                                            \
  template Tensor<S> mean(const Tensor<S>&);                                                   \
  template Tensor<S> l1_mean(const Tensor<S>&, const Tensor<S>&);                              \
  template Tensor<S> sq_mean(const Tensor<S>&);                                                \
  template Tensor<S> weighted_sum(const std::vector<std::pair<S, Tensor<S>>>&);                \
  template Tensor<S> instance_norm(const Tensor<S>&, S);                                       \
  template Tensor<S> upsample_nearest2x(const Tensor<S>&);                                     \
  template Tensor<S> concat_channels(const Tensor<S>&, const Tensor<S>&);                      \
  template Tensor<S> grid_sample(const Tensor<S>&, const Tensor<S>&);

DGR_INSTANTIATE_OPS(float)
DGR_INSTANTIATE_OPS(double)

}  // namespace dgr
