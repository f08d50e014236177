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

#include "dgr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "dgr/parallel.hpp"
#include "dgr/trainer.hpp"

namespace dgr {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::filesystem::path dataset_dir(const std::filesystem::path& out, std::uint64_t seed, int level) {
  return out / "data" / ("seed" + std::to_string(seed) + "_level" + std::to_string(level));
}

const BenchRow* find_row(const BenchResult& r, TrainMode mode, int level, std::uint64_t seed) {
  for (const auto& row : r.rows)
    if (row.mode == mode && row.level == level && row.seed == seed && row.ok) return &row;
  return nullptr;
}

}  // namespace

std::string bench_csv_header() {
  return "mode,level,seed,status,psnr_mean,psnr_std,ssim_mean,ssim_std,mae_mean,r2_self_px,"
         "r2_cross_px,test_hash";
}

std::string bench_csv_row(const BenchRow& row) {
  std::ostringstream out;
  out << to_string(row.mode) << ',' << row.level << ',' << row.seed << ',';
  if (!row.ok) {
    std::string reason = row.failure;
    std::replace(reason.begin(), reason.end(), ',', ';');
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    out << "failed: " << reason << ",,,,,,,," << hex(row.test_hash);
    return out.str();
  }
  out << "ok," << fmt(row.psnr.mean) << ',' << fmt(row.psnr.std) << ',' << fmt(row.ssim.mean)
      << ',' << fmt(row.ssim.std) << ',' << fmt(row.mae.mean) << ','
      << (row.r2_self ? fmt(row.r2_self->mean_magnitude) : "") << ','
      << (row.r2_cross ? fmt(row.r2_cross->mean_magnitude) : "") << ',' << hex(row.test_hash);
  return out.str();
}

void write_bench_csv(const BenchResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << bench_csv_header() << '\n';
  for (const auto& row : result.rows) out << bench_csv_row(row) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

BenchResult read_bench_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != bench_csv_header()) throw IoError(path.string() + ": unexpected header '" + line + "'");
  BenchResult result;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) throw IoError(path.string() + ": malformed row '" + line + "'");
    BenchRow row;
    row.mode = parse_mode(cells[0]);
    row.level = std::stoi(cells[1]);
    row.seed = std::stoull(cells[2]);
    row.ok = cells[3] == "ok";
    if (!row.ok) row.failure = cells[3].rfind("failed: ", 0) == 0 ? cells[3].substr(8) : cells[3];
    row.test_hash = std::stoull(cells[11], nullptr, 16);
    if (row.ok) {
      row.psnr.mean = std::stod(cells[4]);
      row.psnr.std = std::stod(cells[5]);
      row.ssim.mean = std::stod(cells[6]);
      row.ssim.std = std::stod(cells[7]);
      row.mae.mean = std::stod(cells[8]);
      if (!cells[9].empty()) row.r2_self = FieldStats{std::stod(cells[9]), 0.0};
      if (!cells[10].empty()) row.r2_cross = FieldStats{std::stod(cells[10]), 0.0};
    }
    result.rows.push_back(row);
  }
  return result;
}

BenchResult run_bench(const BenchOptions& opts, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  nlohmann::ordered_json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["config_hash"] = hex(config_hash(opts.train));
  manifest["config"] = to_toml(opts.train);
  manifest["datasets"] = nlohmann::ordered_json::array();

  // Datasets first: one per (seed, level), shared by every mode.
  std::map<std::pair<std::uint64_t, int>, std::uint64_t> test_hashes;
  for (auto seed : opts.seeds)
    for (int level : opts.levels) {
      const auto dir = dataset_dir(out_dir, seed, level);
      DatasetOptions d = opts.data;
      d.seed = seed;
      d.level = level;
      d.crop = opts.train.crop;
      d.threads = opts.threads;
      if (!std::filesystem::exists(dir / kManifestName)) {
        if (opts.verbose) std::cerr << "synthesizing " << dir.string() << "\n";
        build_dataset(d, dir);
      }
      const auto records = read_manifest(dir / kManifestName);
      test_hashes[{seed, level}] = test_transform_hash(records);
      manifest["datasets"].push_back({{"seed", seed},
                                      {"level", level},
                                      {"content_hash", hex(dataset_content_hash(dir / kManifestName))},
                                      {"test_transform_hash", hex(test_hashes[{seed, level}])}});
    }

  BenchResult result;
  for (auto seed : opts.seeds)
    for (int level : opts.levels)
      for (auto mode : opts.modes) {
        BenchRow row;
        row.mode = mode;
        row.level = level;
        row.seed = seed;
        row.test_hash = test_hashes[{seed, level}];
        result.rows.push_back(row);
      }

  parallel_for(static_cast<Index>(result.rows.size()), opts.parallel_cells, [&](Index k) {
    auto& row = result.rows[static_cast<std::size_t>(k)];
    const auto start = std::chrono::steady_clock::now();
    const auto data = dataset_dir(out_dir, row.seed, row.level);
    const auto cell = out_dir / "cells" /
                      (to_string(row.mode) + "_level" + std::to_string(row.level) + "_seed" +
                       std::to_string(row.seed));
    try {
      TrainConfig cfg = opts.train;
      cfg.mode = row.mode;
      cfg.seed = row.seed;
      TrainOptions topts;
      topts.threads = opts.parallel_cells > 1 ? 1 : opts.threads;
      topts.verbose = opts.verbose;
      const auto trained = run_training(cfg, data / kManifestName, cell, topts);
      const auto bundle = load_bundle(trained.final_checkpoint.string());
      const auto pairs = load_split(data / kManifestName, Split::test, topts.threads);
      EvalOptions eopts;
      eopts.threads = topts.threads;
      eopts.out_dir = cell / "eval";
      eopts.heatmaps = 4;
      const auto report = evaluate(bundle, pairs, eopts);
      row.psnr = report.psnr;
      row.ssim = report.ssim;
      row.mae = report.mae;
      row.r2_self = report.r2_self;
      row.r2_cross = report.r2_cross;
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.failure = e.what();
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (opts.verbose) {
      std::cerr << to_string(row.mode) << " level " << row.level << " seed " << row.seed << ": "
                << (row.ok ? "psnr " + fmt(row.psnr.mean) : "failed: " + row.failure) << " ("
                << fmt(row.seconds) << " s)\n";
    }
  });

  write_bench_csv(result, out_dir / "bench.csv");
  {
    std::ofstream timing(out_dir / "bench_timing.csv", std::ios::binary | std::ios::trunc);
    timing << "mode,level,seed,seconds\n";
    for (const auto& row : result.rows)
      timing << to_string(row.mode) << ',' << row.level << ',' << row.seed << ',' << fmt(row.seconds)
             << '\n';
    if (!timing) throw IoError("cannot write bench_timing.csv");
  }
  manifest["modes"] = nlohmann::ordered_json::array();
  for (auto m : opts.modes) manifest["modes"].push_back(to_string(m));
  manifest["levels"] = opts.levels;
  manifest["seeds"] = opts.seeds;
  std::ofstream mf(out_dir / "run_manifest.json", std::ios::binary | std::ios::trunc);
  mf << manifest.dump(2) << '\n';
  if (!mf) throw IoError("cannot write run_manifest.json");
  return result;
}

namespace {

// Per-seed entries end in "; "; drop the last separator.
std::string joined(const std::ostringstream& parts) {
  std::string s = parts.str();
  if (s.size() >= 2 && s.compare(s.size() - 2, 2, "; ") == 0) s.resize(s.size() - 2);
  return s;
}

}  // namespace

std::vector<TrendCheck> assess_trends(const BenchResult& result) {
  std::vector<int> levels;
  std::vector<std::uint64_t> seeds;
  for (const auto& r : result.rows) {
    if (std::find(levels.begin(), levels.end(), r.level) == levels.end()) levels.push_back(r.level);
    if (std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end()) seeds.push_back(r.seed);
  }
  std::sort(levels.begin(), levels.end());
  std::vector<TrendCheck> checks = {{"a: baseline degrades by > 1.0 dB", false, ""},
                                    {"b: dgr degrades by <= 1.0 dB", false, ""},
                                    {"c: dgr beats baseline by >= 0.5 dB at the top level", false, ""},
                                    {"d: dgr >= rnr - 0.2 dB everywhere, > rnr at the top level", false, ""}};
  if (levels.size() < 2) {
    for (auto& c : checks) c.detail = "needs at least two levels";
    return checks;
  }
  const int lo = levels.front(), hi = levels.back();
  int votes[4] = {0, 0, 0, 0};
  std::ostringstream details[4];
  for (auto seed : seeds) {
    auto psnr = [&](TrainMode m, int level) -> std::optional<double> {
      const auto* row = find_row(result, m, level, seed);
      return row ? std::optional<double>(row->psnr.mean) : std::nullopt;
    };
    const auto b_lo = psnr(TrainMode::baseline, lo), b_hi = psnr(TrainMode::baseline, hi);
    const auto g_lo = psnr(TrainMode::dgr, lo), g_hi = psnr(TrainMode::dgr, hi);
    bool pass[4] = {false, false, false, false};
    if (b_lo && b_hi) {
      pass[0] = *b_hi < *b_lo - 1.0;
      details[0] << "seed " << seed << ": " << fmt(*b_lo) << " -> " << fmt(*b_hi) << "; ";
    }
    if (g_lo && g_hi) {
      pass[1] = *g_hi >= *g_lo - 1.0;
      details[1] << "seed " << seed << ": " << fmt(*g_lo) << " -> " << fmt(*g_hi) << "; ";
    }
    if (g_hi && b_hi) {
      pass[2] = *g_hi >= *b_hi + 0.5;
      details[2] << "seed " << seed << ": dgr " << fmt(*g_hi) << " vs baseline " << fmt(*b_hi) << "; ";
    }
    bool d_ok = true;
    details[3] << "seed " << seed << ":";
    for (int level : levels) {
      const auto g = psnr(TrainMode::dgr, level), r = psnr(TrainMode::rnr, level);
      if (!g || !r) {
        d_ok = false;
        details[3] << " level " << level << " missing";
        continue;
      }
      d_ok = d_ok && *g >= *r - 0.2 && (level != hi || *g > *r);
      details[3] << " L" << level << " dgr " << fmt(*g) << " rnr " << fmt(*r);
    }
    details[3] << "; ";
    pass[3] = d_ok;
    for (int i = 0; i < 4; ++i) votes[i] += pass[i] ? 1 : 0;
  }
  for (int i = 0; i < 4; ++i) {
    checks[static_cast<std::size_t>(i)].passed = 2 * votes[i] > static_cast<int>(seeds.size());
    checks[static_cast<std::size_t>(i)].detail =
        std::to_string(votes[i]) + "/" + std::to_string(seeds.size()) + " seeds; " + joined(details[i]);
  }
  return checks;
}

TrendCheck assess_decoupling(const BenchResult& result) {
  TrendCheck check{"anti-laziness: r2_self < 0.7 px, r2_cross > 1.5 x r2_self", false, ""};
  int hi = -1;
  for (const auto& r : result.rows)
    if (r.mode == TrainMode::dgr) hi = std::max(hi, r.level);
  int votes = 0, total = 0;
  std::ostringstream detail;
  for (const auto& r : result.rows) {
    if (r.mode != TrainMode::dgr || r.level != hi) continue;
    ++total;
    if (!r.ok || !r.r2_self || !r.r2_cross) {
      detail << "seed " << r.seed << ": missing; ";
      continue;
    }
    const double self = r.r2_self->mean_magnitude, cross = r.r2_cross->mean_magnitude;
    const bool ok = self < 0.7 && cross > 1.5 * self;
    votes += ok ? 1 : 0;
    detail << "seed " << r.seed << ": self " << fmt(self) << " cross " << fmt(cross) << "; ";
  }
  check.passed = total > 0 && 2 * votes > total;
  check.detail = std::to_string(votes) + "/" + std::to_string(total) + " seeds; " + joined(detail);
  return check;
}

}  // namespace dgr
