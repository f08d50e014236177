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

// Command-line front end: synth, train, eval, bench.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dgr/bench.hpp"
#include "dgr/checkpoint.hpp"
#include "dgr/config.hpp"
#include "dgr/parallel.hpp"
#include "dgr/synthdata.hpp"
#include "dgr/trainer.hpp"

namespace fs = std::filesystem;
using namespace dgr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitArgs = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

fs::path manifest_path(const fs::path& data) {
  return fs::is_directory(data) ? data / kManifestName : data;
}

void write_run_manifest(const fs::path& out, const std::string& command,
                        const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json j;
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  std::ofstream f(out / "run_manifest.json", std::ios::binary | std::ios::trunc);
  f << j.dump(2) << '\n';
  if (!f) throw IoError("cannot write " + (out / "run_manifest.json").string());
}

// "1,3,5" or "1..5".
std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const int a = std::stoi(text.substr(0, dots)), b = std::stoi(text.substr(dots + 2));
    if (a > b) throw std::invalid_argument("empty level range '" + text + "'");
    for (int l = a; l <= b; ++l) out.push_back(l);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  if (out.empty()) throw std::invalid_argument("no levels given");
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_report(const MetricsReport& r) {
  std::printf("images %zu  psnr %.4f +- %.4f dB  ssim %.4f  mae %.3f\n", r.rows.size(),
              r.psnr.mean, r.psnr.std, r.ssim.mean, r.mae.mean);
  if (r.r2_self && r.r2_cross) {
    std::printf("r2 field mean: self %.4f px  cross %.4f px\n", r.r2_self->mean_magnitude,
                r.r2_cross->mean_magnitude);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Registration-guided stain translation lab"};
  app.require_subcommand(1);
  std::optional<int> threads_flag;
  app.add_option("--threads", threads_flag, "Worker threads (default: DGR_THREADS or 1)");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic stain-pair dataset");
  DatasetOptions dopts;
  std::string synth_out, source_style = "stain_a", target_style = "stain_b";
  synth->add_option("--n-train", dopts.n_train, "Training pairs")->check(CLI::PositiveNumber);
  synth->add_option("--n-test", dopts.n_test, "Test pairs")->check(CLI::PositiveNumber);
  synth->add_option("--level", dopts.level, "Misalignment level 0..5")->check(CLI::Range(0, 5));
  synth->add_option("--seed", dopts.seed, "Dataset seed");
  synth->add_option("--source-size", dopts.source_size, "Side of the generated source patch");
  synth->add_option("--crop", dopts.crop, "Side of the stored crop");
  synth->add_option("--source-style", source_style, "stain_a or stain_b");
  synth->add_option("--target-style", target_style, "stain_a or stain_b");
  synth->add_option("--out", synth_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train one mode on a dataset");
  std::string train_config, train_data, train_out, resume;
  train->add_option("--config", train_config, "TOML config")->required();
  train->add_option("--data", train_data, "Dataset directory or manifest")->required();
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--resume", resume, "Checkpoint to resume from");
  bool train_verbose = false;
  train->add_flag("-v,--verbose", train_verbose, "Per-epoch progress on stderr");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the aligned test split");
  std::string eval_ckpt, eval_data, eval_out;
  bool passthrough = false;
  int heatmaps = 4;
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint");
  eval->add_option("--data", eval_data, "Dataset directory or manifest")->required();
  eval->add_option("--out", eval_out, "Output directory")->required();
  eval->add_option("--heatmaps", heatmaps, "Heatmaps to write");
  eval->add_flag("--passthrough", passthrough, "Use the identity predictor instead of a checkpoint");

  // bench
  auto* bench = app.add_subcommand("bench", "Mode x level robustness sweep");
  std::string modes = "baseline,rnr,dgr", levels = "1,3,5", seeds_text, bench_out, bench_config;
  std::uint64_t bench_seed = 1;
  int parallel_cells = 1;
  std::optional<int> bench_epochs;
  int bench_train = 2000, bench_test = 200;
  bool assert_trends = false, bench_verbose = false;
  bench->add_option("--modes", modes, "Comma-separated modes");
  bench->add_option("--levels", levels, "Levels, e.g. 1,3,5 or 1..5");
  bench->add_option("--seed", bench_seed, "Seed for data and training");
  bench->add_option("--seeds", seeds_text, "Comma-separated seeds (overrides --seed)");
  bench->add_option("--config", bench_config, "TOML training config (mode and seed are overridden)");
  bench->add_option("--epochs", bench_epochs, "Override the config's epochs");
  bench->add_option("--n-train", bench_train, "Training pairs per dataset")->check(CLI::PositiveNumber);
  bench->add_option("--n-test", bench_test, "Test pairs per dataset")->check(CLI::PositiveNumber);
  bench->add_option("--parallel-cells", parallel_cells, "Cells trained concurrently")
      ->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_out, "Output directory")->required();
  bench->add_flag("--assert-trends", assert_trends, "Exit non-zero unless the robustness trends hold");
  bench->add_flag("-v,--verbose", bench_verbose, "Per-cell progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitArgs;
  }

  try {
    const int threads = resolve_threads(threads_flag);

    if (*synth) {
      dopts.threads = threads;
      dopts.source_style = parse_style(source_style);
      dopts.target_style = parse_style(target_style);
      const auto records = build_dataset(dopts, synth_out);
      const auto mpath = fs::path(synth_out) / kManifestName;
      std::printf("wrote %d train + %d test pairs at level %d to %s (manifest %s)\n", dopts.n_train,
                  dopts.n_test, dopts.level, synth_out.c_str(), hex(dataset_content_hash(mpath)).c_str());
      return records.empty() ? kExitFailure : kExitOk;
    }

    if (*train) {
      const auto cfg = load_config(train_config);
      TrainOptions opts;
      opts.threads = threads;
      opts.verbose = train_verbose;
      if (!resume.empty()) opts.resume_from = resume;
      const auto mpath = manifest_path(train_data);
      const auto result = run_training(cfg, mpath, train_out, opts);
      write_run_manifest(train_out, "train",
                         {{"config_hash", hex(config_hash(cfg))},
                          {"dataset_hash", hex(dataset_content_hash(mpath))},
                          {"config", to_toml(cfg)}});
      std::printf("trained %s for %lld steps in %.1f s; checkpoint %s\n", to_string(cfg.mode).c_str(),
                  static_cast<long long>(result.steps), result.seconds,
                  result.final_checkpoint.string().c_str());
      return kExitOk;
    }

    if (*eval) {
      if (!passthrough && eval_ckpt.empty()) throw std::invalid_argument("eval needs --ckpt or --passthrough");
      const auto mpath = manifest_path(eval_data);
      const auto pairs = load_split(mpath, Split::test, threads);
      EvalOptions opts;
      opts.threads = threads;
      opts.out_dir = fs::path(eval_out);
      opts.heatmaps = heatmaps;
      MetricsReport report;
      if (passthrough) {
        report = evaluate_predictor([](const Tensor<float>& x) { return x; }, pairs, opts);
        std::ofstream(fs::path(eval_out) / "report.json", std::ios::binary | std::ios::trunc)
            << report_json(report) << '\n';
      } else {
        report = evaluate(load_bundle(eval_ckpt), pairs, opts);
      }
      write_run_manifest(eval_out, "eval",
                         {{"checkpoint", passthrough ? "passthrough" : eval_ckpt},
                          {"dataset_hash", hex(dataset_content_hash(mpath))}});
      print_report(report);
      return kExitOk;
    }

    if (*bench) {
      BenchOptions opts;
      opts.modes.clear();
      for (const auto& m : split_list(modes)) opts.modes.push_back(parse_mode(m));
      if (opts.modes.empty()) throw std::invalid_argument("no modes given");
      opts.levels = parse_levels(levels);
      for (int l : opts.levels) level_spec(l);
      opts.seeds = {bench_seed};
      if (!seeds_text.empty()) {
        opts.seeds.clear();
        for (const auto& s : split_list(seeds_text)) opts.seeds.push_back(std::stoull(s));
      }
      if (!bench_config.empty()) opts.train = load_config(bench_config);
      if (bench_epochs) opts.train.epochs = *bench_epochs;
      opts.train.validate();
      opts.data.n_train = bench_train;
      opts.data.n_test = bench_test;
      opts.threads = threads;
      opts.parallel_cells = parallel_cells;
      opts.verbose = bench_verbose;
      const auto result = run_bench(opts, bench_out);
      int failed = 0;
      for (const auto& row : result.rows) {
        std::printf("%s\n", bench_csv_row(row).c_str());
        failed += row.ok ? 0 : 1;
      }
      if (assert_trends) {
        bool all = true;
        auto checks = assess_trends(result);
        checks.push_back(assess_decoupling(result));
        for (const auto& c : checks) {
          std::printf("[%s] %s (%s)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
          all = all && c.passed;
        }
        if (!all) return kExitFailure;
      }
      return failed ? kExitFailure : kExitOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitArgs;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return kExitNumerical;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitArgs;
  } catch (const std::out_of_range& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitArgs;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitOk;
}
