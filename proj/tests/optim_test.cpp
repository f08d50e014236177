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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dgr/ops.hpp"
#include "dgr/optim.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dgr;
using dgr::testing::random_tensor;
using dgr::testing::ScalarAdam;

TEST(Adam, DefaultsAreGanStandard) {
  AdamHyper h;
  EXPECT_EQ(h.beta1, 0.5);
  EXPECT_EQ(h.beta2, 0.999);
  EXPECT_EQ(h.eps, 1e-8);
}

TEST(Adam, FirstStepClosedForm) {
  double p = 0.0, g = 1.0, m = 0.0, v = 0.0;
  AdamHyper h{0.1, 0.5, 0.999, 1e-8};
  adam_update(&p, &g, &m, &v, 1, h, 1);
  // m_hat = v_hat = 1, so the step is -0.1 / (1 + eps).
  EXPECT_NEAR(p, -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p, -0.1, 1e-8);
  EXPECT_DOUBLE_EQ(m, 0.5);
  EXPECT_NEAR(v, 0.001, 1e-15);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  std::mt19937_64 rng(1);
  auto p = random_tensor<float>({5, 7}, rng);
  const Buffer<float> before = p.data();
  Buffer<float> g(p.size()), m(p.size()), v(p.size());
  g.setZero();
  m.setZero();
  v.setZero();
  for (int step = 1; step <= 3; ++step)
    adam_update(p.mutable_data().data(), g.data(), m.data(), v.data(), p.size(), AdamHyper{}, step);
  for (Index i = 0; i < p.size(); ++i) EXPECT_EQ(p.data()[i], before[i]);
}

TEST(Adam, MatchesScalarOracleOverHundredSteps) {
  const AdamHyper h{1e-2, 0.5, 0.999, 1e-8};
  constexpr int kN = 4;
  double p[kN] = {0.3, -1.2, 2.0, 0.0}, m[kN] = {}, v[kN] = {};
  std::vector<ScalarAdam> oracle(kN, ScalarAdam{h.lr, h.beta1, h.beta2, h.eps});
  double ref[kN];
  std::copy(p, p + kN, ref);
  double worst = 0.0;
  for (int t = 1; t <= 100; ++t) {
    double g[kN];
    for (int i = 0; i < kN; ++i) g[i] = std::sin(0.3 * t + i) + 0.5 * p[i];
    adam_update(p, g, m, v, kN, h, t);
    for (int i = 0; i < kN; ++i) {
      ref[i] = oracle[static_cast<std::size_t>(i)].step(ref[i], std::sin(0.3 * t + i) + 0.5 * ref[i]);
      worst = std::max(worst, std::abs(p[i] - ref[i]));
    }
  }
  EXPECT_LE(worst, 1e-7);
}

TEST(Adam, ClassSkipsParamsWithoutGradients) {
  std::mt19937_64 rng(2);
  auto a = random_tensor<float>({3, 3}, rng, -1, 1, true);
  auto b = random_tensor<float>({2}, rng, -1, 1, true);
  Adam<float> opt({{"a", a}, {"b", b}}, AdamHyper{0.1, 0.5, 0.999, 1e-8});
  const Buffer<float> a0 = a.data(), b0 = b.data();
  sq_mean(a).backward();
  opt.step();
  EXPECT_EQ(opt.steps(), 1);
  for (Index i = 0; i < b.size(); ++i) EXPECT_EQ(b.data()[i], b0[i]);
  for (Index i = 0; i < a.size(); ++i) {
    // A first step moves every entry by lr in the direction opposite its gradient.
    const double expected = a0[i] - 0.1 * (a0[i] > 0 ? 1.0 : -1.0);
    EXPECT_NEAR(a.data()[i], expected, 1e-6);
  }
  const auto moments = opt.moment_tensors();
  ASSERT_EQ(moments.size(), 4u);
  EXPECT_EQ(moments[0].first, "a.adam_m");
  EXPECT_EQ(moments[3].first, "b.adam_v");
  EXPECT_EQ(moments[0].second.shape(), a.shape());
  opt.zero_grad();
  EXPECT_FALSE(a.has_grad());
}
