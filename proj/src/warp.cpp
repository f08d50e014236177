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

#include "dgr/warp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dgr/image_io.hpp"
#include "dgr/ops.hpp"

namespace dgr {

template <typename Scalar>
DeformationField<Scalar>::DeformationField(Tensor<Scalar> t) : tensor_(std::move(t)) {
  detail::require_rank("DeformationField", tensor_.shape(), 4);
  if (tensor_.dim(1) != 2) {
    throw ShapeError("DeformationField: dimension 1 must be 2, got " + shape_str(tensor_.shape()));
  }
}

template <typename Scalar>
bool DeformationField<Scalar>::is_sane() const {
  const double bound = static_cast<double>(std::max(height(), width()));
  const auto& d = tensor_.data();
  if (!d.allFinite()) return false;
  const Index hw = height() * width();
  for (Index b = 0; b < batch(); ++b)
    for (Index p = 0; p < hw; ++p) {
      const double y = d[(b * 2) * hw + p], x = d[(b * 2 + 1) * hw + p];
      if (std::hypot(y, x) > bound) return false;
    }
  return true;
}

template <typename Scalar>
DeformationField<Scalar> identity_field(Index batch, Index height, Index width) {
  if (batch <= 0 || height <= 0 || width <= 0) {
    throw ShapeError("identity_field: dimensions must be positive");
  }
  return DeformationField<Scalar>(Tensor<Scalar>::zeros(Shape{batch, 2, height, width}));
}

template <typename Scalar>
DeformationField<Scalar> affine_field(const AffineParams& params, Index height, Index width,
                                      Index batch) {
  if (!(params.scale > 0.0)) throw std::invalid_argument("affine_field: scale must be positive");
  const double theta = params.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta) * params.scale, s = std::sin(theta) * params.scale;
  const double cy = (height - 1) / 2.0, cx = (width - 1) / 2.0;
  const double ty = params.ty * height, tx = params.tx * width;
  const Index hw = height * width;
  Buffer<Scalar> data(batch * 2 * hw);
  for (Index i = 0; i < height; ++i) {
    for (Index j = 0; j < width; ++j) {
      const double py = i - cy, px = j - cx;
      const double qy = c * py + s * px + cy + ty;
      const double qx = -s * py + c * px + cx + tx;
      for (Index b = 0; b < batch; ++b) {
        data[(b * 2) * hw + i * width + j] = static_cast<Scalar>(qy - i);
        data[(b * 2 + 1) * hw + i * width + j] = static_cast<Scalar>(qx - j);
      }
    }
  }
  return DeformationField<Scalar>(Tensor<Scalar>(Shape{batch, 2, height, width}, std::move(data)));
}

template <typename Scalar>
Tensor<Scalar> resample(const Tensor<Scalar>& image, const DeformationField<Scalar>& field) {
  return grid_sample(image, field.tensor());
}

template <typename Scalar>
DeformationField<Scalar> compose(const DeformationField<Scalar>& outer,
                                 const DeformationField<Scalar>& inner) {
  detail::require_same_shape("compose", outer.tensor().shape(), inner.tensor().shape());
  return DeformationField<Scalar>(
      add(grid_sample(outer.tensor(), inner.tensor()), inner.tensor()));
}

template <typename Scalar>
Tensor<Scalar> smoothness_penalty(const DeformationField<Scalar>& field) {
  const auto& t = field.tensor();
  const Index planes = t.dim(0) * 2, h = t.dim(2), w = t.dim(3);
  if (h < 2 || w < 2) throw ShapeError("smoothness_penalty: H and W must be >= 2");
  const double n = static_cast<double>(t.size());
  double acc = 0.0;
  const Scalar* f = t.data().data();
  for (Index p = 0; p < planes; ++p) {
    const Scalar* plane = f + p * h * w;
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) {
        const double v = plane[i * w + j];
        if (i + 1 < h) acc += (plane[(i + 1) * w + j] - v) * (plane[(i + 1) * w + j] - v);
        if (j + 1 < w) acc += (plane[i * w + j + 1] - v) * (plane[i * w + j + 1] - v);
      }
  }
  return make_result<Scalar>(
      "smoothness_penalty", Shape{1}, Buffer<Scalar>::Constant(1, static_cast<Scalar>(acc / n)),
      {t}, [planes, h, w, n](detail::Node<Scalar>& out) {
        auto& parent = *out.parents[0];
        if (!parent.requires_grad) return;
        auto& g = parent.grad_buffer();
        const Scalar k = static_cast<Scalar>(2.0 / n) * out.grad[0];
        const Scalar* f = parent.value.data();
        for (Index p = 0; p < planes; ++p) {
          const Index base = p * h * w;
          for (Index i = 0; i < h; ++i)
            for (Index j = 0; j < w; ++j) {
              const Index q = base + i * w + j;
              if (i + 1 < h) {
                const Scalar d = f[q + w] - f[q];
                g[q + w] += k * d;
                g[q] -= k * d;
              }
              if (j + 1 < w) {
                const Scalar d = f[q + 1] - f[q];
                g[q + 1] += k * d;
                g[q] -= k * d;
              }
            }
        }
      });
}

template <typename Scalar>
FieldStats field_stats(const DeformationField<Scalar>& field) {
  const auto& d = field.tensor().data();
  const Index hw = field.height() * field.width();
  FieldStats stats;
  double total = 0.0;
  for (Index b = 0; b < field.batch(); ++b)
    for (Index p = 0; p < hw; ++p) {
      const double m = std::hypot(static_cast<double>(d[(b * 2) * hw + p]),
                                  static_cast<double>(d[(b * 2 + 1) * hw + p]));
      total += m;
      stats.max_magnitude = std::max(stats.max_magnitude, m);
    }
  stats.mean_magnitude = total / static_cast<double>(field.batch() * hw);
  return stats;
}

std::string export_field_png(const DeformationField<float>& field, Index b, double max_disp,
                             const std::string& stem) {
  if (!(max_disp > 0.0)) throw std::invalid_argument("export_field_png: max_disp must be positive");
  const Index h = field.height(), w = field.width();
  Image8 img(3, h, w);
  auto quantize = [max_disp](double v) {
    const double u = (v + max_disp) / (2.0 * max_disp) * 255.0;
    return static_cast<std::uint8_t>(std::lround(std::clamp(u, 0.0, 255.0)));
  };
  for (Index i = 0; i < h; ++i)
    for (Index j = 0; j < w; ++j) {
      img.at(0, i, j) = quantize(field.dy(b, i, j));
      img.at(1, i, j) = quantize(field.dx(b, i, j));
      img.at(2, i, j) = 0;
    }
  std::ostringstream name;
  name << stem << "_maxdisp" << max_disp << ".png";
  write_png(name.str(), img);
  return name.str();
}

template class DeformationField<float>;
template class DeformationField<double>;

#define DGR_INSTANTIATE_WARP(S)                                                                 \
  template DeformationField<S> identity_field<S>(Index, Index, Index);                          \
  template DeformationField<S> affine_field<S>(const AffineParams&, Index, Index, Index);       \
  template Tensor<S> resample(const Tensor<S>&, const DeformationField<S>&);                    \
  template DeformationField<S> compose(const DeformationField<S>&, const DeformationField<S>&); \
  template Tensor<S> smoothness_penalty(const DeformationField<S>&);                            \
  template FieldStats field_stats(const DeformationField<S>&);

DGR_INSTANTIATE_WARP(float)
DGR_INSTANTIATE_WARP(double)

}  // namespace dgr
