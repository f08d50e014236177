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

#include <cmath>

#include "dgr/tensor.hpp"

namespace dgr::testing {

// Independent SSIM: explicit 11 x 11 Gaussian window at every valid position.
inline double naive_ssim(const Tensor<double>& a, const Tensor<double>& b) {
  const int k = 11;
  double win[11][11], norm = 0.0;
  for (int u = 0; u < k; ++u)
    for (int v = 0; v < k; ++v) {
      win[u][v] = std::exp(-((u - 5) * (u - 5) + (v - 5) * (v - 5)) / (2.0 * 1.5 * 1.5));
      norm += win[u][v];
    }
  const Index planes = a.dim(0) * a.dim(1), h = a.dim(2), w = a.dim(3);
  double total = 0.0;
  Index count = 0;
  for (Index p = 0; p < planes; ++p)
    for (Index i = 0; i + k <= h; ++i)
      for (Index j = 0; j + k <= w; ++j) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int u = 0; u < k; ++u)
          for (int v = 0; v < k; ++v) {
            const double g = win[u][v] / norm;
            const double x = a.data()[(p * h + i + u) * w + j + v];
            const double y = b.data()[(p * h + i + u) * w + j + v];
            mx += g * x;
            my += g * y;
            sxx += g * x * x;
            syy += g * y * y;
            sxy += g * x * y;
          }
        const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
        const double c1 = 1e-4, c2 = 9e-4;
        total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
  return total / double(count);
}

// Textbook scalar Adam with bias correction.
struct ScalarAdam {
  double lr, b1, b2, eps;
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double p, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double m_hat = m / (1 - std::pow(b1, t));
    const double v_hat = v / (1 - std::pow(b2, t));
    return p - lr * m_hat / (std::sqrt(v_hat) + eps);
  }
};

}  // namespace dgr::testing
