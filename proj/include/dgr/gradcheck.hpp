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

#include <functional>
#include <string>
#include <vector>

#include "dgr/tensor.hpp"

namespace dgr {

struct GradCheckReport {
  std::string op;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Default central-difference step: 1e-3 for float, 1e-5 for double.
template <typename Scalar>
constexpr Scalar default_fd_step() {
  return sizeof(Scalar) == sizeof(float) ? Scalar(1e-3) : Scalar(1e-5);
}

/// Compares the backward() gradient of scalar-valued `f` at `point` with central
/// differences. The error is normwise: max_i |analytic_i - numeric_i| divided by
/// max(max_i |numeric_i|, max_i |analytic_i|, 1e-12). When `coords` is non-empty
/// only those entries are perturbed and compared.
template <typename Scalar>
GradCheckReport finite_diff_check(const std::string& name,
                                  const std::function<Tensor<Scalar>(const Tensor<Scalar>&)>& f,
                                  const Tensor<Scalar>& point, double tolerance,
                                  const std::vector<Index>& coords = {},
                                  Scalar step = default_fd_step<Scalar>());

/// Same check, perturbing an existing leaf (e.g. a network weight) in place.
/// `loss` recomputes the scalar from scratch on every call.
template <typename Scalar>
GradCheckReport finite_diff_check_leaf(const std::string& name,
                                       const std::function<Tensor<Scalar>()>& loss,
                                       Tensor<Scalar> leaf, double tolerance,
                                       const std::vector<Index>& coords = {},
                                       Scalar step = default_fd_step<Scalar>());

}  // namespace dgr
