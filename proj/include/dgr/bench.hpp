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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dgr/config.hpp"
#include "dgr/metrics.hpp"
#include "dgr/synthdata.hpp"

namespace dgr {

inline constexpr const char* kToolVersion = "0.1.0";

struct BenchOptions {
  std::vector<TrainMode> modes{TrainMode::baseline, TrainMode::rnr, TrainMode::dgr};
  std::vector<int> levels{1, 3, 5};
  std::vector<std::uint64_t> seeds{1};
  TrainConfig train;       // mode and seed are overridden per cell
  DatasetOptions data;     // level and seed are overridden per dataset
  int threads = 1;         // workers inside a cell (data synthesis, evaluation)
  int parallel_cells = 1;  // cells trained concurrently
  bool verbose = false;
};

struct BenchRow {
  TrainMode mode = TrainMode::dgr;
  int level = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;  // reason when !ok
  Aggregate psnr, ssim, mae;
  std::optional<FieldStats> r2_self, r2_cross;
  std::uint64_t test_hash = 0;
  double seconds = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;  // ordered by seed, level, mode
};

/// Trains and evaluates every (seed, level, mode) cell. Datasets live under
/// out_dir/data/seed<s>_level<l> and are synthesized when missing. Writes
/// bench.csv (deterministic columns), bench_timing.csv (wall clock) and
/// run_manifest.json. A failing cell is recorded and the sweep continues.
BenchResult run_bench(const BenchOptions& opts, const std::filesystem::path& out_dir);

std::string bench_csv_header();
std::string bench_csv_row(const BenchRow& row);
void write_bench_csv(const BenchResult& result, const std::filesystem::path& path);
/// Parses bench.csv back into rows. Field stats carry only the mean magnitude.
BenchResult read_bench_csv(const std::filesystem::path& path);

struct TrendCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Robustness trends over levels lo < hi (default 1 and 5), per seed and then
/// by majority over seeds:
///   a) baseline psnr(hi) < baseline psnr(lo) - 1.0
///   b) dgr psnr(hi) >= dgr psnr(lo) - 1.0
///   c) dgr psnr(hi) >= baseline psnr(hi) + 0.5
///   d) dgr psnr(k) >= rnr psnr(k) - 0.2 for every level, and dgr > rnr at hi
std::vector<TrendCheck> assess_trends(const BenchResult& result);

/// Anti-laziness probe on the highest-level dgr cells (majority over seeds):
/// r2_self mean < 0.7 px and r2_cross mean > 1.5 x r2_self mean.
TrendCheck assess_decoupling(const BenchResult& result);

}  // namespace dgr
