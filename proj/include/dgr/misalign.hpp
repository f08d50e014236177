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

#include <optional>
#include <random>
#include <string>

#include "dgr/tensor.hpp"
#include "dgr/warp.hpp"

namespace dgr {

enum class Split { train, test };

std::string to_string(Split split);
Split parse_split(const std::string& name);

/// An input/target pair. x and y are 1 x C x H x W in [0, 1]. For synthetic
/// data `y_ideal` is the target aligned with the unwarped input and
/// `x_aligned` is that unwarped input; `gt_affine` is the warp applied to x.
struct ImagePair {
  Tensor<float> x;
  Tensor<float> y;
  std::optional<Tensor<float>> y_ideal;
  std::optional<Tensor<float>> x_aligned;
  std::optional<AffineParams> gt_affine;
  Split split = Split::train;
};

/// Symmetric bounds of one misalignment level: rotation in degrees,
/// translation and rescaling as fractions.
struct MisalignmentSpec {
  int level = 0;
  double rot_max_deg = 0.0;
  double trans_max = 0.0;
  double scale_max = 0.0;
};

inline constexpr int kMaxMisalignmentLevel = 5;

/// Level k in 1..5: rotation +-k degrees, translation +-2k %, rescaling +-2k %.
/// Level 0 is the aligned setting.
MisalignmentSpec level_spec(int level);

/// rotation ~ U(-rot_max, rot_max), ty, tx ~ U(-trans_max, trans_max),
/// scale ~ U(1 - scale_max, 1 + scale_max). Zero bounds give exact identity.
AffineParams sample_affine(const MisalignmentSpec& spec, std::mt19937_64& rng);

/// Rounds every parameter to 9 significant digits (the manifest precision).
AffineParams quantize_params(const AffineParams& p);

/// Center crop of a 1 x C x H x W image.
Tensor<float> center_crop(const Tensor<float>& image, Index crop);

/// Warps x with `params` (border-clamped bilinear), then center-crops x, y and
/// y_ideal to crop x crop. The unwarped crop of x is kept as x_aligned.
ImagePair apply_misalignment(const ImagePair& pair, const AffineParams& params, Index crop);

/// Largest crop whose sampling footprint stays inside the source for every
/// transform of `spec` (ignoring rotation): side * (1 - 2 * (trans + scale)).
double clamp_free_crop_bound(const MisalignmentSpec& spec, Index side);

}  // namespace dgr
