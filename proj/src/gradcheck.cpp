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

#include "dgr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dgr {

template <typename Scalar>
GradCheckReport finite_diff_check_leaf(const std::string& name,
                                       const std::function<Tensor<Scalar>()>& loss,
                                       Tensor<Scalar> leaf, double tolerance,
                                       const std::vector<Index>& coords, Scalar step) {
  const bool had_grad = leaf.requires_grad();
  leaf.set_requires_grad(true);
  leaf.zero_grad();
  loss().backward();
  const Buffer<Scalar> analytic = leaf.grad();
  leaf.zero_grad();

  std::vector<Index> idx = coords;
  if (idx.empty()) {
    idx.resize(static_cast<std::size_t>(leaf.size()));
    std::iota(idx.begin(), idx.end(), Index{0});
  }

  double max_diff = 0.0, max_num = 0.0, max_ana = 0.0;
  {
    NoGradGuard no_grad;
    auto& data = leaf.mutable_data();
    for (Index i : idx) {
      const Scalar saved = data[i];
      data[i] = saved + step;
      const double up = loss().item();
      data[i] = saved - step;
      const double down = loss().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * static_cast<double>(step));
      const double a = analytic[i];
      max_diff = std::max(max_diff, std::abs(a - numeric));
      max_num = std::max(max_num, std::abs(numeric));
      max_ana = std::max(max_ana, std::abs(a));
    }
  }
  leaf.set_requires_grad(had_grad);

  GradCheckReport report;
  report.op = name;
  report.max_rel_error = max_diff / std::max({max_num, max_ana, 1e-12});
  report.tolerance = tolerance;
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

template <typename Scalar>
GradCheckReport finite_diff_check(const std::string& name,
                                  const std::function<Tensor<Scalar>(const Tensor<Scalar>&)>& f,
                                  const Tensor<Scalar>& point, double tolerance,
                                  const std::vector<Index>& coords, Scalar step) {
  Tensor<Scalar> leaf(point.shape(), point.data(), true);
  return finite_diff_check_leaf<Scalar>(
      name, [&] { return f(leaf); }, leaf, tolerance, coords, step);
}

template GradCheckReport finite_diff_check(const std::string&,
                                           const std::function<Tensor<float>(const Tensor<float>&)>&,
                                           const Tensor<float>&, double, const std::vector<Index>&,
                                           float);
template GradCheckReport finite_diff_check(
    const std::string&, const std::function<Tensor<double>(const Tensor<double>&)>&,
    const Tensor<double>&, double, const std::vector<Index>&, double);
template GradCheckReport finite_diff_check_leaf(const std::string&,
                                                const std::function<Tensor<float>()>&,
                                                Tensor<float>, double, const std::vector<Index>&,
                                                float);
template GradCheckReport finite_diff_check_leaf(const std::string&,
                                                const std::function<Tensor<double>()>&,
                                                Tensor<double>, double, const std::vector<Index>&,
                                                double);

}  // namespace dgr
