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

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "dgr/checkpoint.hpp"
#include "test_util.hpp"

using namespace dgr;
using dgr::testing::random_tensor;
using dgr::testing::scratch_dir;
using dgr::testing::slurp;

namespace {

NamedParams<float> sample_tensors(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return {{"a.weight", random_tensor<float>({4, 3, 3, 3}, rng)},
          {"a.bias", random_tensor<float>({4}, rng)},
          {"step", Tensor<float>(Shape{1}, Buffer<float>::Constant(1, 7.0f))}};
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(Checkpoint, LayoutIsDocumentedFormat) {
  const auto path = scratch_dir("ckpt_layout") / "one.ckpt";
  NamedParams<float> t{{"w", Tensor<float>(Shape{2}, Buffer<float>{{1.5f, -2.0f}})}};
  save_tensors(path.string(), t);
  const std::string bytes = slurp(path);
  // magic(8) + count(4) + name len(2) + "w"(1) + rank(1) + dims(4) + payload(8)
  ASSERT_EQ(bytes.size(), 28u);
  EXPECT_EQ(bytes.substr(0, 8), "DGRCKPT1");
  std::uint32_t count;
  std::memcpy(&count, bytes.data() + 8, 4);
  EXPECT_EQ(count, 1u);
  EXPECT_EQ(bytes[14], 'w');
  EXPECT_EQ(bytes[15], 1);
  float payload[2];
  std::memcpy(payload, bytes.data() + 20, 8);
  EXPECT_EQ(payload[0], 1.5f);
  EXPECT_EQ(payload[1], -2.0f);
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto path = (scratch_dir("ckpt_round") / "t.ckpt").string();
  const auto t = sample_tensors(1);
  save_tensors(path, t);
  const auto back = read_tensors(path);
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_EQ(back[k].first, t[k].first);
    EXPECT_EQ(back[k].second.shape(), t[k].second.shape());
    EXPECT_EQ(std::memcmp(back[k].second.data().data(), t[k].second.data().data(),
                          sizeof(float) * static_cast<std::size_t>(t[k].second.size())),
              0);
  }
  save_tensors(path + "2", back);
  EXPECT_EQ(slurp(path), slurp(path + "2"));
}

TEST(Checkpoint, BadMagicAndTruncationAreStructuredErrors) {
  const auto dir = scratch_dir("ckpt_bad");
  const auto good = (dir / "good.ckpt").string();
  save_tensors(good, sample_tensors(2));
  std::string bytes = slurp(good);

  std::string bad = bytes;
  bad[3] = 'X';
  write_bytes(dir / "magic.ckpt", bad);
  try {
    read_tensors((dir / "magic.ckpt").string());
    FAIL() << "bad magic accepted";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
  }

  for (std::size_t cut : {std::size_t{4}, std::size_t{10}, std::size_t{20}, bytes.size() - 1}) {
    write_bytes(dir / "cut.ckpt", bytes.substr(0, cut));
    EXPECT_THROW(read_tensors((dir / "cut.ckpt").string()), CheckpointError) << cut;
  }
  write_bytes(dir / "tail.ckpt", bytes + "x");
  EXPECT_THROW(read_tensors((dir / "tail.ckpt").string()), CheckpointError);
  EXPECT_THROW(read_tensors((dir / "absent.ckpt").string()), IoError);
}

TEST(Checkpoint, AssignIsAllOrNothing) {
  const auto stored = sample_tensors(3);
  auto targets = sample_tensors(4);
  const Buffer<float> before = targets[0].second.data();

  // A shape mismatch in the last tensor must leave the first untouched.
  NamedParams<float> mismatched = stored;
  mismatched[2].second = Tensor<float>(Shape{2}, Buffer<float>::Zero(2));
  EXPECT_THROW(assign_tensors(mismatched, targets), CheckpointError);
  for (Index i = 0; i < before.size(); ++i) EXPECT_EQ(targets[0].second.data()[i], before[i]);

  NamedParams<float> missing(stored.begin(), stored.begin() + 2);
  try {
    assign_tensors(missing, targets);
    FAIL() << "missing tensor accepted";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("'step'"), std::string::npos);
  }

  assign_tensors(stored, targets);
  for (std::size_t k = 0; k < stored.size(); ++k)
    for (Index i = 0; i < stored[k].second.size(); ++i)
      EXPECT_EQ(targets[k].second.data()[i], stored[k].second.data()[i]);
}
