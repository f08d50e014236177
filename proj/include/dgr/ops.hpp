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

#include "dgr/tensor.hpp"

namespace dgr {

// Differentiable primitives. Binary ops require identical shapes; there is
// no broadcasting. Images are B x C x H x W, row-major.

/// 2-D cross-correlation with zero padding. `bias` may be undefined.
/// Output spatial size is floor((H + 2*padding - K) / stride) + 1.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                      const Tensor<Scalar>& bias, Index stride, Index padding);

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel, Index stride,
                      Index padding) {
  return conv2d(input, kernel, Tensor<Scalar>{}, stride, padding);
}

template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& x, Scalar slope);
template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x);
template <typename Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& x);

enum class Activation { leaky_relu, sigmoid, tanh };

template <typename Scalar>
Tensor<Scalar> activation(const Tensor<Scalar>& x, Activation kind, Scalar slope = Scalar(0.2)) {
  switch (kind) {
    case Activation::leaky_relu: return leaky_relu(x, slope);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return tanh(x);
  }
  return x;
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
/// a * x + b, elementwise with scalar coefficients.
template <typename Scalar>
Tensor<Scalar> affine(const Tensor<Scalar>& x, Scalar a, Scalar b);
template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& x, Scalar a) {
  return affine(x, a, Scalar(0));
}
template <typename Scalar>
Tensor<Scalar> abs(const Tensor<Scalar>& x);
/// log(max(x, floor)); the gradient is zero where the clamp is active.
template <typename Scalar>
Tensor<Scalar> log_clamped(const Tensor<Scalar>& x, Scalar floor = Scalar(1e-6));
/// Elementwise clamp; gradient passes only inside [lo, hi].
template <typename Scalar>
Tensor<Scalar> clamp(const Tensor<Scalar>& x, Scalar lo, Scalar hi);

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x);
/// mean(|a - b|)
template <typename Scalar>
Tensor<Scalar> l1_mean(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
/// mean(a^2)
template <typename Scalar>
Tensor<Scalar> sq_mean(const Tensor<Scalar>& a);

/// sum_i w_i * t_i over scalar tensors; terms with undefined tensors are skipped.
template <typename Scalar>
Tensor<Scalar> weighted_sum(const std::vector<std::pair<Scalar, Tensor<Scalar>>>& terms);

/// Per-(batch, channel) normalization over H x W, no affine parameters.
template <typename Scalar>
Tensor<Scalar> instance_norm(const Tensor<Scalar>& x, Scalar eps = Scalar(1e-5));

template <typename Scalar>
Tensor<Scalar> upsample_nearest2x(const Tensor<Scalar>& x);

/// Concatenates two B x C x H x W tensors along channels.
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

/// Bilinear resampling: out(b,c,i,j) = input at (i + field(b,0,i,j), j + field(b,1,i,j)).
/// Displacements are in pixels; coordinates outside the image clamp to the border,
/// where the gradient w.r.t. the field is zero. Differentiable in both arguments.
template <typename Scalar>
Tensor<Scalar> grid_sample(const Tensor<Scalar>& input, const Tensor<Scalar>& field);

namespace detail {
/// Deterministic sum with a double accumulator.
template <typename Scalar>
double stable_sum(const Scalar* data, Index n);
void require_same_shape(const char* op, const Shape& a, const Shape& b);
void require_rank(const char* op, const Shape& s, int rank);
}  // namespace detail

}  // namespace dgr
