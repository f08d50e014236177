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

#include <cstdint>
#include <string>
#include <vector>

#include "dgr/nets.hpp"
#include "dgr/tensor.hpp"

namespace dgr {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of n entries at 1-based `step`, computed in
/// double and stored back in Scalar:
///   m = b1 m + (1 - b1) g,  v = b2 v + (1 - b2) g^2
///   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
template <typename Scalar>
void adam_update(Scalar* param, const Scalar* grad, Scalar* m, Scalar* v, Index n,
                 const AdamHyper& hyper, std::int64_t step);

/// Adam over one parameter group with moments shaped like the parameters.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(NamedParams<Scalar> params, AdamHyper hyper);

  /// Updates every parameter that has an accumulated gradient.
  void step();
  void zero_grad();

  const NamedParams<Scalar>& params() const { return params_; }
  const AdamHyper& hyper() const { return hyper_; }
  std::int64_t steps() const { return step_; }
  void set_steps(std::int64_t s) { step_ = s; }

  /// Moment buffers as tensors named "<param>.adam_m" / "<param>.adam_v"; the
  /// tensors share storage with the optimizer.
  NamedParams<Scalar> moment_tensors() const;

 private:
  NamedParams<Scalar> params_;
  std::vector<Tensor<Scalar>> m_, v_;
  AdamHyper hyper_;
  std::int64_t step_ = 0;
};

}  // namespace dgr
