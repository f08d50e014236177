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

#include <fstream>

#include "dgr/ops.hpp"
#include "dgr/tensor.hpp"
#include "test_util.hpp"

using namespace dgr;
using dgr::testing::random_tensor;

TEST(Tensor, ShapeMatchesData) {
  auto t = Tensor<float>::zeros({2, 3, 4});
  EXPECT_EQ(t.size(), 24);
  EXPECT_EQ(numel(t.shape()), t.size());
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, Buffer<float>(3)), ShapeError);
}

TEST(Tensor, MeanBackwardSpreadsOneOverN) {
  std::mt19937_64 rng(1);
  auto x = random_tensor<double>({2, 5}, rng, -1, 1, true);
  mean(x).backward();
  for (Index i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 0.1);
}

TEST(Tensor, SqMeanBackwardIsTwoXOverN) {
  std::mt19937_64 rng(2);
  auto x = random_tensor<double>({7}, rng, -1, 1, true);
  sq_mean(x).backward();
  for (Index i = 0; i < x.size(); ++i) EXPECT_NEAR(x.grad()[i], 2.0 * x.data()[i] / 7.0, 1e-15);
}

TEST(Tensor, NonScalarBackwardThrows) {
  auto x = Tensor<float>::full({3}, 1.0f, true);
  EXPECT_THROW(scale(x, 2.0f).backward(), ShapeError);
}

TEST(Tensor, LeafGradientsAccumulateUntilZeroed) {
  auto x = Tensor<double>::full({4}, 1.0, true);
  mean(x).backward();
  mean(x).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.5);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
  mean(x).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
}

TEST(Tensor, RepeatedBackwardOnSharedGraphDoesNotDoubleIntermediates) {
  auto x = Tensor<double>::full({2}, 3.0, true);
  auto y = mul(x, x);
  auto loss = mean(y);
  loss.backward();
  loss.backward();
  // d/dx mean(x^2) = x, twice.
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Tensor, NoGradGuardSkipsRecording) {
  auto x = Tensor<float>::full({2}, 1.0f, true);
  Tensor<float> y;
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    y = scale(x, 2.0f);
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.node()->parents.empty());
}

TEST(Tensor, DetachCutsHistory) {
  auto x = Tensor<double>::full({2}, 1.0, true);
  auto y = scale(x, 3.0).detach();
  EXPECT_FALSE(y.requires_grad());
  EXPECT_DOUBLE_EQ(y.data()[1], 3.0);
}

TEST(Tensor, OnlyLeavesToggleRequiresGrad) {
  auto x = Tensor<float>::full({2}, 1.0f, true);
  auto y = scale(x, 2.0f);
  EXPECT_THROW(y.set_requires_grad(false), std::logic_error);
}

TEST(Tensor, ItemRequiresScalar) {
  EXPECT_FLOAT_EQ(Tensor<float>::scalar(2.5f).item(), 2.5f);
  EXPECT_THROW(Tensor<float>::zeros({2}).item(), ShapeError);
}

TEST(Tensor, DumpWritesShapeThenNineDigitValues) {
  const auto dir = dgr::testing::scratch_dir("dump");
  Tensor<float> t(Shape{1, 2}, Buffer<float>::LinSpaced(2, 0.1f, 0.2f));
  dump_tensor(t, (dir / "t.txt").string());
  std::ifstream in(dir / "t.txt");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "1 2");
  std::getline(in, line);
  EXPECT_EQ(line, "0.100000001");
  std::getline(in, line);
  EXPECT_EQ(line, "0.200000003");
}

TEST(Tensor, ReductionsAreBitwiseDeterministic) {
  std::mt19937_64 rng(3);
  auto x = random_tensor<float>({3, 4, 17, 19}, rng, -1, 1, true);
  auto a = sq_mean(instance_norm(x));
  auto b = sq_mean(instance_norm(x));
  EXPECT_EQ(a.item(), b.item());
  a.backward();
  const Buffer<float> ga = x.grad();
  x.zero_grad();
  b.backward();
  EXPECT_TRUE((ga == x.grad()).all());
}
