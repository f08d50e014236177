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

#include "dgr/misalign.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace dgr {

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + name + "'");
}

MisalignmentSpec level_spec(int level) {
  if (level < 0 || level > kMaxMisalignmentLevel) {
    throw std::out_of_range("level_spec: level must be in 0.." +
                            std::to_string(kMaxMisalignmentLevel) + ", got " +
                            std::to_string(level));
  }
  // Rotation +-1..5 deg, translation and rescaling +-2..10 %.
  static constexpr double kRotation[] = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  static constexpr double kTranslation[] = {0.0, 0.02, 0.04, 0.06, 0.08, 0.10};
  static constexpr double kRescale[] = {0.0, 0.02, 0.04, 0.06, 0.08, 0.10};
  return {level, kRotation[level], kTranslation[level], kRescale[level]};
}

AffineParams sample_affine(const MisalignmentSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  // Always draw four values so the stream position does not depend on the level.
  const double u_rot = unit(rng), u_ty = unit(rng), u_tx = unit(rng), u_scale = unit(rng);
  AffineParams p;
  if (spec.rot_max_deg != 0.0) p.rotation_deg = u_rot * spec.rot_max_deg;
  if (spec.trans_max != 0.0) {
    p.ty = u_ty * spec.trans_max;
    p.tx = u_tx * spec.trans_max;
  }
  if (spec.scale_max != 0.0) p.scale = 1.0 + u_scale * spec.scale_max;
  return p;
}

AffineParams quantize_params(const AffineParams& p) {
  auto q = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::strtod(buf, nullptr);
  };
  return {q(p.rotation_deg), q(p.ty), q(p.tx), q(p.scale)};
}

Tensor<float> center_crop(const Tensor<float>& image, Index crop) {
  if (image.rank() != 4 || image.dim(0) != 1) throw ShapeError("center_crop: expected 1 x C x H x W");
  const Index c = image.dim(1), h = image.dim(2), w = image.dim(3);
  if (crop > h || crop > w) {
    throw std::invalid_argument("center_crop: crop " + std::to_string(crop) +
                                " exceeds image " + shape_str(image.shape()));
  }
  const Index top = (h - crop) / 2, left = (w - crop) / 2;
  Buffer<float> out(c * crop * crop);
  for (Index ch = 0; ch < c; ++ch)
    for (Index i = 0; i < crop; ++i)
      for (Index j = 0; j < crop; ++j)
        out[(ch * crop + i) * crop + j] = image.data()[(ch * h + top + i) * w + left + j];
  return Tensor<float>(Shape{1, c, crop, crop}, std::move(out));
}

ImagePair apply_misalignment(const ImagePair& pair, const AffineParams& params, Index crop) {
  const Index h = pair.x.dim(2), w = pair.x.dim(3);
  if (crop > std::min(h, w)) {
    throw std::invalid_argument("apply_misalignment: crop " + std::to_string(crop) +
                                " is larger than the pair (" + std::to_string(h) + "x" +
                                std::to_string(w) + ")");
  }
  if (crop % 16 != 0) throw std::invalid_argument("apply_misalignment: crop must be divisible by 16");
  NoGradGuard no_grad;
  ImagePair out;
  out.split = pair.split;
  out.gt_affine = params;
  const Tensor<float> warped =
      params.is_identity() ? pair.x : resample(pair.x, affine_field<float>(params, h, w));
  out.x = center_crop(warped, crop);
  out.x_aligned = center_crop(pair.x, crop);
  out.y = center_crop(pair.y, crop);
  if (pair.y_ideal) out.y_ideal = center_crop(*pair.y_ideal, crop);
  return out;
}

double clamp_free_crop_bound(const MisalignmentSpec& spec, Index side) {
  return static_cast<double>(side) * (1.0 - 2.0 * (spec.trans_max + spec.scale_max));
}

}  // namespace dgr
