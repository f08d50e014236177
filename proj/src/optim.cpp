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

#include "dgr/optim.hpp"

#include <cmath>

namespace dgr {

template <typename Scalar>
void adam_update(Scalar* param, const Scalar* grad, Scalar* m, Scalar* v, Index n,
                 const AdamHyper& hyper, std::int64_t step) {
  const double b1 = hyper.beta1, b2 = hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (Index i = 0; i < n; ++i) {
    const double g = grad[i];
    const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
    const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
    m[i] = static_cast<Scalar>(mi);
    v[i] = static_cast<Scalar>(vi);
    const double update = hyper.lr * (mi / c1) / (std::sqrt(vi / c2) + hyper.eps);
    param[i] = static_cast<Scalar>(static_cast<double>(param[i]) - update);
  }
}

template <typename Scalar>
Adam<Scalar>::Adam(NamedParams<Scalar> params, AdamHyper hyper)
    : params_(std::move(params)), hyper_(hyper) {
  for (const auto& [name, p] : params_) {
    m_.push_back(Tensor<Scalar>::zeros(p.shape()));
    v_.push_back(Tensor<Scalar>::zeros(p.shape()));
  }
}

template <typename Scalar>
void Adam<Scalar>::step() {
  ++step_;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor<Scalar> p = params_[k].second;
    if (!p.has_grad()) continue;
    adam_update(p.mutable_data().data(), p.mutable_grad().data(), m_[k].mutable_data().data(),
                v_[k].mutable_data().data(), p.size(), hyper_, step_);
  }
}

template <typename Scalar>
void Adam<Scalar>::zero_grad() {
  for (auto& [name, p] : params_) {
    Tensor<Scalar> t = p;
    t.zero_grad();
  }
}

template <typename Scalar>
NamedParams<Scalar> Adam<Scalar>::moment_tensors() const {
  NamedParams<Scalar> out;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    out.emplace_back(params_[k].first + ".adam_m", m_[k]);
    out.emplace_back(params_[k].first + ".adam_v", v_[k]);
  }
  return out;
}

template void adam_update<float>(float*, const float*, float*, float*, Index, const AdamHyper&,
                                 std::int64_t);
template void adam_update<double>(double*, const double*, double*, double*, Index,
                                  const AdamHyper&, std::int64_t);
template class Adam<float>;
template class Adam<double>;

}  // namespace dgr
