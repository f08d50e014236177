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

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dgr/bench.hpp"
#include "test_util.hpp"

using namespace dgr;
using dgr::testing::scratch_dir;
using dgr::testing::slurp;

namespace {

BenchOptions tiny_bench() {
  BenchOptions o;
  o.modes = {TrainMode::baseline, TrainMode::dgr};
  o.levels = {1, 5};
  o.seeds = {3};
  o.train.epochs = 1;
  o.train.crop = 32;
  o.train.checkpoint_every = 0;
  o.data.n_train = 4;
  o.data.n_test = 2;
  o.data.source_size = 80;
  return o;
}

std::string fmt_roundtrip(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

BenchRow row(TrainMode mode, int level, std::uint64_t seed, double psnr) {
  BenchRow r;
  r.mode = mode;
  r.level = level;
  r.seed = seed;
  r.ok = true;
  r.psnr.mean = psnr;
  return r;
}

// PSNR by (mode, level) for one seed: baseline 20 -> 17, rnr 20 -> 18, dgr 20.1 -> 19.5.
void add_good_seed(BenchResult& r, std::uint64_t seed) {
  r.rows.push_back(row(TrainMode::baseline, 1, seed, 20.0));
  r.rows.push_back(row(TrainMode::rnr, 1, seed, 20.0));
  r.rows.push_back(row(TrainMode::dgr, 1, seed, 20.1));
  r.rows.push_back(row(TrainMode::baseline, 5, seed, 17.0));
  r.rows.push_back(row(TrainMode::rnr, 5, seed, 18.0));
  r.rows.push_back(row(TrainMode::dgr, 5, seed, 19.5));
}

}  // namespace

TEST(Bench, GridRowsSharedHashesAndDeterminism) {
  const auto dir_a = scratch_dir("bench_a"), dir_b = scratch_dir("bench_b");
  const auto opts = tiny_bench();
  const auto a = run_bench(opts, dir_a);
  ASSERT_EQ(a.rows.size(), 4u);
  std::set<std::uint64_t> hashes;
  for (const auto& r : a.rows) {
    EXPECT_TRUE(r.ok) << r.failure;
    hashes.insert(r.test_hash);
  }
  EXPECT_EQ(hashes.size(), 1u);
  EXPECT_FALSE(a.rows[0].r2_self);
  EXPECT_TRUE(a.rows[1].r2_self);

  const std::string csv = slurp(dir_a / "bench.csv");
  EXPECT_EQ(line_count(csv), 5u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), bench_csv_header());
  EXPECT_EQ(line_count(slurp(dir_a / "bench_timing.csv")), 5u);
  EXPECT_NE(slurp(dir_a / "run_manifest.json").find("\"config_hash\""), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir_a / "cells" / "dgr_level5_seed3" / "eval" / "metrics.csv"));

  run_bench(opts, dir_b);
  EXPECT_EQ(csv, slurp(dir_b / "bench.csv"));

  const auto back = read_bench_csv(dir_a / "bench.csv");
  ASSERT_EQ(back.rows.size(), a.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(bench_csv_row(back.rows[i]), bench_csv_row(a.rows[i]));
    EXPECT_EQ(back.rows[i].psnr.mean, std::stod(fmt_roundtrip(a.rows[i].psnr.mean)));
  }
}

TEST(Bench, FailingCellIsRecordedAndSweepContinues) {
  const auto dir = scratch_dir("bench_fail");
  auto opts = tiny_bench();
  opts.modes = {TrainMode::baseline};
  // A dataset without train pairs makes the level-1 cell fail.
  const auto broken = dir / "data" / "seed3_level1";
  std::filesystem::create_directories(broken);
  std::ofstream(broken / kManifestName).flush();
  const auto r = run_bench(opts, dir);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_FALSE(r.rows[0].ok);
  EXPECT_NE(r.rows[0].failure.find("no train pairs"), std::string::npos) << r.rows[0].failure;
  EXPECT_TRUE(r.rows[1].ok) << r.rows[1].failure;
  EXPECT_NE(bench_csv_row(r.rows[0]).find(",failed: "), std::string::npos);
  write_bench_csv(r, dir / "again.csv");
  const auto back = read_bench_csv(dir / "again.csv");
  EXPECT_FALSE(back.rows[0].ok);
  EXPECT_EQ(bench_csv_row(back.rows[0]), bench_csv_row(r.rows[0]));
  EXPECT_THROW(read_bench_csv(dir / "absent.csv"), IoError);
}

TEST(Trends, AllHoldOnGoodSweep) {
  BenchResult r;
  add_good_seed(r, 1);
  for (const auto& c : assess_trends(r)) EXPECT_TRUE(c.passed) << c.name << " " << c.detail;
}

TEST(Trends, EachMarginIsEnforced) {
  auto failing = [](auto mutate) {
    BenchResult r;
    add_good_seed(r, 1);
    mutate(r);
    std::vector<bool> passed;
    for (const auto& c : assess_trends(r)) passed.push_back(c.passed);
    return passed;
  };
  auto set = [](BenchResult& r, TrainMode m, int level, double v) {
    for (auto& x : r.rows)
      if (x.mode == m && x.level == level) x.psnr.mean = v;
  };
  // Baseline drop of exactly 1.0 dB is not strictly below.
  EXPECT_EQ(failing([&](BenchResult& r) { set(r, TrainMode::baseline, 5, 19.0); })[0], false);
  EXPECT_EQ(failing([&](BenchResult& r) { set(r, TrainMode::dgr, 5, 19.0); })[1], false);
  EXPECT_EQ(failing([&](BenchResult& r) { set(r, TrainMode::dgr, 5, 19.11); })[1], true);
  EXPECT_EQ(failing([&](BenchResult& r) { set(r, TrainMode::baseline, 5, 19.1); })[2], false);
  EXPECT_EQ(failing([&](BenchResult& r) { set(r, TrainMode::rnr, 1, 20.31); })[3], false);
  EXPECT_EQ(failing([&](BenchResult& r) { set(r, TrainMode::rnr, 5, 19.5); })[3], false);
}

TEST(Trends, MajorityOverSeeds) {
  BenchResult r;
  add_good_seed(r, 1);
  add_good_seed(r, 2);
  add_good_seed(r, 3);
  for (auto& x : r.rows)
    if (x.seed == 3 && x.mode == TrainMode::dgr && x.level == 5) x.psnr.mean = 10.0;
  auto checks = assess_trends(r);
  EXPECT_TRUE(checks[1].passed);
  for (auto& x : r.rows)
    if (x.seed == 2 && x.mode == TrainMode::dgr && x.level == 5) x.psnr.mean = 10.0;
  checks = assess_trends(r);
  EXPECT_FALSE(checks[1].passed);
  EXPECT_NE(checks[1].detail.find("1/3 seeds"), std::string::npos) << checks[1].detail;
}

TEST(Trends, DecouplingProbe) {
  BenchResult r;
  auto add = [&](int level, double self, double cross) {
    BenchRow x = row(TrainMode::dgr, level, 1, 20.0);
    x.r2_self = FieldStats{self, self};
    x.r2_cross = FieldStats{cross, cross};
    r.rows.push_back(x);
  };
  add(1, 5.0, 5.0);
  add(5, 0.4, 0.61);
  EXPECT_TRUE(assess_decoupling(r).passed);
  r.rows.back().r2_cross = FieldStats{0.6, 0.6};
  EXPECT_FALSE(assess_decoupling(r).passed);
  r.rows.back().r2_self = FieldStats{0.7, 0.7};
  r.rows.back().r2_cross = FieldStats{5.0, 5.0};
  EXPECT_FALSE(assess_decoupling(r).passed);
}
