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

#pragma once

#include <string>

#include "dgr/tensor.hpp"

namespace dgr {

/// Per-pixel displacement map, B x 2 x H x W in pixels. Channel 0 is the
/// vertical displacement (dy), channel 1 the horizontal one (dx). A point p of
/// the output samples the source at p + field(p).
template <typename Scalar>
class DeformationField {
 public:
  DeformationField() = default;
  explicit DeformationField(Tensor<Scalar> t);

  const Tensor<Scalar>& tensor() const { return tensor_; }
  Index batch() const { return tensor_.dim(0); }
  Index height() const { return tensor_.dim(2); }
  Index width() const { return tensor_.dim(3); }
  DeformationField detach() const { return DeformationField(tensor_.detach()); }

  Scalar dy(Index b, Index i, Index j) const {
    return tensor_.data()[((b * 2) * height() + i) * width() + j];
  }
  Scalar dx(Index b, Index i, Index j) const {
    return tensor_.data()[((b * 2 + 1) * height() + i) * width() + j];
  }

  /// Finite everywhere with magnitude at most max(H, W).
  bool is_sane() const;

 private:
  Tensor<Scalar> tensor_;
};

/// Rotation in degrees, translation (ty, tx) as a fraction of the image side,
/// and an isotropic scale, all about the image centre ((H-1)/2, (W-1)/2).
struct AffineParams {
  double rotation_deg = 0.0;
  double ty = 0.0;
  double tx = 0.0;
  double scale = 1.0;

  bool is_identity() const { return rotation_deg == 0.0 && ty == 0.0 && tx == 0.0 && scale == 1.0; }
  bool operator==(const AffineParams&) const = default;
};

template <typename Scalar>
DeformationField<Scalar> identity_field(Index batch, Index height, Index width);

/// field(p) = A (p - c) + c + t - p, with A = scale * [[cos, sin], [-sin, cos]]
/// acting on (y, x) and t = (ty * H, tx * W).
template <typename Scalar>
DeformationField<Scalar> affine_field(const AffineParams& params, Index height, Index width,
                                      Index batch = 1);

/// Bilinear, border-clamped warp of a B x C x H x W image.
template <typename Scalar>
Tensor<Scalar> resample(const Tensor<Scalar>& image, const DeformationField<Scalar>& field);

/// composed(p) = inner(p) + outer(p + inner(p)), outer looked up bilinearly.
/// resample(resample(img, outer), inner) == resample(img, compose(outer, inner)).
template <typename Scalar>
DeformationField<Scalar> compose(const DeformationField<Scalar>& outer,
                                 const DeformationField<Scalar>& inner);

/// Mean over B x 2 x H x W sites of squared forward differences in both
/// directions; differences past the last row/column count as zero.
template <typename Scalar>
Tensor<Scalar> smoothness_penalty(const DeformationField<Scalar>& field);

struct FieldStats {
  double mean_magnitude = 0.0;
  double max_magnitude = 0.0;
};

template <typename Scalar>
FieldStats field_stats(const DeformationField<Scalar>& field);

/// Writes batch item `b` of a field as RGB PNG: R = dy, G = dx, B = 0, each
/// mapped affinely from [-max_disp, +max_disp] to [0, 255]. The file is
/// `<stem>_maxdisp<max_disp>.png`; the path actually written is returned.
std::string export_field_png(const DeformationField<float>& field, Index b, double max_disp,
                             const std::string& stem);

}  // namespace dgr
