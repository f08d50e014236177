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

#include "dgr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "dgr/checkpoint.hpp"
#include "dgr/hash.hpp"
#include "dgr/parallel.hpp"

namespace dgr {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string tensor_stats(const std::string& name, const Tensor<float>& t) {
  if (!t.defined()) return name + ": undefined\n";
  const auto& d = t.data();
  Index non_finite = 0;
  double lo = INFINITY, hi = -INFINITY, sum = 0.0;
  Index finite = 0;
  for (Index i = 0; i < d.size(); ++i) {
    const double v = d[i];
    if (!std::isfinite(v)) {
      ++non_finite;
      continue;
    }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
    ++finite;
  }
  std::ostringstream out;
  out << name << ": shape " << shape_str(t.shape()) << " min " << fmt(lo) << " max " << fmt(hi)
      << " mean " << fmt(finite ? sum / static_cast<double>(finite) : NAN) << " non-finite "
      << non_finite << "\n";
  return out.str();
}

std::string breakdown_dump(const LossBreakdown& bd) {
  std::ostringstream out;
  out << "l1 " << fmt(bd.l1) << " ssim " << fmt(bd.ssim) << " smooth_r1 " << fmt(bd.smooth_r1)
      << " adv " << fmt(bd.adv) << " t1 " << fmt(bd.t1) << " t2 " << fmt(bd.t2) << " t1r "
      << fmt(bd.t1r) << " t2r " << fmt(bd.t2r) << " total_g_r1 " << fmt(bd.total_g_r1)
      << " total_r2 " << fmt(bd.total_r2) << " total_d " << fmt(bd.total_d) << "\n";
  return out.str();
}

[[noreturn]] void abort_numerical(const char* phase, std::int64_t step, const LossBreakdown& bd,
                                  const std::vector<std::pair<std::string, Tensor<float>>>& tensors) {
  std::ostringstream out;
  out << "non-finite or out-of-range loss in " << phase << " at step " << step << "\n" << breakdown_dump(bd);
  for (const auto& [name, t] : tensors) out << tensor_stats(name, t);
  throw NumericalError(out.str());
}

// Every logged term is a mean of non-negative quantities except the SSIM term,
// which lies in [-log 2, -log 1e-6] by its clamp.
bool breakdown_in_range(const LossBreakdown& bd) {
  if (!bd.all_finite()) return false;
  for (double v : {bd.l1, bd.smooth_r1, bd.adv, bd.t1, bd.t2, bd.t1r, bd.t2r, bd.total_d})
    if (v < 0.0) return false;
  constexpr double kSlack = 1e-5;
  return bd.ssim >= -std::log(2.0) - kSlack && bd.ssim <= -std::log(1e-6) + kSlack;
}

bool grads_finite(const NamedParams<float>& params) {
  for (const auto& [name, p] : params)
    if (p.has_grad() && !p.grad().allFinite()) return false;
  return true;
}

void freeze_all(const ModelBundle<float>& bundle) {
  set_trainable(bundle.named_parameters(), false);
}

constexpr const char* kCounters = "meta.counters";

}  // namespace

NetworkSet networks_for(TrainMode mode) {
  return {mode != TrainMode::baseline, mode == TrainMode::dgr};
}

TrainState init_state(const TrainConfig& cfg, Index channels) {
  TrainState s;
  s.bundle = init_models<float>(cfg.seed, channels, networks_for(cfg.mode));
  auto hyper = [&](double lr) { return AdamHyper{lr, cfg.adam_beta1, cfg.adam_beta2, 1e-8}; };
  s.opt_g = Adam<float>(s.bundle.generator.named_parameters(), hyper(cfg.lr_g));
  s.opt_d = Adam<float>(s.bundle.discriminator.named_parameters(), hyper(cfg.lr_d));
  if (s.bundle.r1) s.opt_r1.emplace(s.bundle.r1->named_parameters(), hyper(cfg.lr_r1));
  if (s.bundle.r2) s.opt_r2.emplace(s.bundle.r2->named_parameters(), hyper(cfg.lr_r2));
  freeze_all(s.bundle);
  return s;
}

NamedParams<float> TrainState::checkpoint_tensors() const {
  NamedParams<float> out = bundle.named_parameters();
  auto append = [&](const Adam<float>& opt) {
    for (auto& entry : opt.moment_tensors()) out.push_back(entry);
  };
  append(opt_g);
  append(opt_d);
  if (opt_r1) append(*opt_r1);
  if (opt_r2) append(*opt_r2);
  return out;
}

LossBreakdown train_step(TrainState& state, const Batch<float>& batch, const TrainConfig& cfg,
                         const std::function<void(Phase)>& after_phase) {
  auto& bundle = state.bundle;
  const auto all = bundle.named_parameters();
  const auto g_params = bundle.generator.named_parameters();
  const bool train_r1 = bundle.r1 && !cfg.freeze_r1;
  const bool run_r2 = cfg.mode == TrainMode::dgr && bundle.r2 && !cfg.freeze_r2;

  // Phase 1: G and R1.
  freeze_all(bundle);
  for (auto [n, p] : all) p.zero_grad();
  set_trainable(g_params, true);
  if (train_r1) set_trainable(bundle.r1->named_parameters(), true);
  auto phase = objective_g_r1(batch, bundle, cfg.weights, {cfg.mode, cfg.t1_detach_field});
  LossBreakdown bd = phase.breakdown;
  if (!breakdown_in_range(bd)) {
    freeze_all(bundle);
    abort_numerical("phase 1 (G/R1)", state.step, bd,
                    {{"x", batch.x}, {"y", batch.y}, {"G(x)", phase.gx}, {"R1 field", phase.r1_field.tensor()}});
  }
  phase.total.backward();
  if (!grads_finite(g_params) || (train_r1 && !grads_finite(bundle.r1->named_parameters()))) {
    freeze_all(bundle);
    abort_numerical("phase 1 (G/R1) gradients", state.step, bd, {{"x", batch.x}, {"y", batch.y}});
  }
  state.opt_g.step();
  if (train_r1) state.opt_r1->step();
  freeze_all(bundle);
  const Tensor<float> gx = phase.gx.detach();
  const DeformationField<float> r1_field = phase.r1_field.detach();
  phase = {};
  if (after_phase) after_phase(Phase::generator_r1);

  // Phase 2: R2 on the phase-1 products.
  if (run_r2) {
    for (auto [n, p] : all) p.zero_grad();
    const auto r2_params = bundle.r2->named_parameters();
    set_trainable(r2_params, true);
    auto [total, r2bd] = objective_r2(batch, bundle, cfg.weights, gx, r1_field);
    bd.t2 = r2bd.t2;
    bd.t1r = r2bd.t1r;
    bd.t2r = r2bd.t2r;
    bd.total_r2 = r2bd.total_r2;
    if (!breakdown_in_range(bd)) {
      freeze_all(bundle);
      abort_numerical("phase 2 (R2)", state.step, bd, {{"x", batch.x}, {"y", batch.y}, {"G(x)", gx}});
    }
    total.backward();
    if (!grads_finite(r2_params)) {
      freeze_all(bundle);
      abort_numerical("phase 2 (R2) gradients", state.step, bd, {{"x", batch.x}, {"y", batch.y}});
    }
    state.opt_r2->step();
    freeze_all(bundle);
    if (after_phase) after_phase(Phase::registration_r2);
  }

  // Phase 3: D.
  for (auto [n, p] : all) p.zero_grad();
  const auto d_params = bundle.discriminator.named_parameters();
  set_trainable(d_params, true);
  const auto d_total = objective_d(batch, bundle, gx);
  bd.total_d = d_total.item();
  if (!breakdown_in_range(bd)) {
    freeze_all(bundle);
    abort_numerical("phase 3 (D)", state.step, bd, {{"y", batch.y}, {"G(x)", gx}});
  }
  d_total.backward();
  if (!grads_finite(d_params)) {
    freeze_all(bundle);
    abort_numerical("phase 3 (D) gradients", state.step, bd, {{"y", batch.y}, {"G(x)", gx}});
  }
  state.opt_d.step();
  freeze_all(bundle);
  for (auto [n, p] : all) p.zero_grad();
  if (after_phase) after_phase(Phase::discriminator);

  ++state.step;
  return bd;
}

void save_state(const TrainState& state, const std::string& path) {
  auto tensors = state.checkpoint_tensors();
  const double counters[] = {static_cast<double>(state.step), static_cast<double>(state.epoch),
                             static_cast<double>(state.opt_g.steps()),
                             static_cast<double>(state.opt_d.steps()),
                             static_cast<double>(state.opt_r1 ? state.opt_r1->steps() : 0),
                             static_cast<double>(state.opt_r2 ? state.opt_r2->steps() : 0)};
  Buffer<float> meta(6);
  for (int i = 0; i < 6; ++i) {
    if (counters[i] >= 16777216.0) throw IoError("save_state: counter exceeds checkpoint range");
    meta[i] = static_cast<float>(counters[i]);
  }
  tensors.emplace_back(kCounters, Tensor<float>(Shape{6}, std::move(meta)));
  save_tensors(path, tensors);
}

TrainState load_state(const std::string& path, const TrainConfig& cfg, Index channels) {
  const auto stored = read_tensors(path);
  TrainState s = init_state(cfg, channels);
  auto targets = s.checkpoint_tensors();
  targets.emplace_back(kCounters, Tensor<float>::zeros(Shape{6}));
  assign_tensors(stored, targets);
  const auto& meta = targets.back().second.data();
  s.step = static_cast<std::int64_t>(meta[0]);
  s.epoch = static_cast<int>(meta[1]);
  s.opt_g.set_steps(static_cast<std::int64_t>(meta[2]));
  s.opt_d.set_steps(static_cast<std::int64_t>(meta[3]));
  if (s.opt_r1) s.opt_r1->set_steps(static_cast<std::int64_t>(meta[4]));
  if (s.opt_r2) s.opt_r2->set_steps(static_cast<std::int64_t>(meta[5]));
  return s;
}

std::string training_csv_header() {
  return "step,epoch,mode,l1,ssim,smooth_r1,adv,t1,t2,t1r,t2r,total_g_r1,total_r2,total_d";
}

std::string training_csv_row(std::int64_t step, int epoch, TrainMode mode, const LossBreakdown& bd) {
  std::ostringstream out;
  out << step << ',' << epoch << ',' << to_string(mode);
  for (double v : {bd.l1, bd.ssim, bd.smooth_r1, bd.adv, bd.t1, bd.t2, bd.t1r, bd.t2r,
                   bd.total_g_r1, bd.total_r2, bd.total_d})
    out << ',' << fmt(v);
  return out.str();
}

Batch<float> make_batch(const std::vector<LoadedPair>& pairs, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  const Image8& first = pairs.at(indices.front()).x;
  const Index c = first.channels, h = first.height, w = first.width, plane = c * h * w;
  const Index b = static_cast<Index>(indices.size());
  Buffer<float> x(b * plane), y(b * plane);
  for (Index k = 0; k < b; ++k) {
    const auto& p = pairs.at(indices[static_cast<std::size_t>(k)]);
    if (p.x.channels != c || p.x.height != h || p.x.width != w || p.y.channels != c ||
        p.y.height != h || p.y.width != w) {
      throw ShapeError("make_batch: pair " + std::to_string(p.record.id) + " has a different shape");
    }
    for (Index i = 0; i < plane; ++i) {
      x[k * plane + i] = static_cast<float>(p.x.data[static_cast<std::size_t>(i)]) / 255.0f;
      y[k * plane + i] = static_cast<float>(p.y.data[static_cast<std::size_t>(i)]) / 255.0f;
    }
  }
  return {Tensor<float>(Shape{b, c, h, w}, std::move(x)), Tensor<float>(Shape{b, c, h, w}, std::move(y))};
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(mix_seed(seed, 1000 + static_cast<std::uint64_t>(epoch)));
  // Fisher-Yates with explicit draws so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

TrainResult run_training(const TrainConfig& cfg, const std::filesystem::path& manifest,
                         const std::filesystem::path& out_dir, const TrainOptions& opts) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto pairs = load_split(manifest, Split::train, opts.threads);
  if (pairs.empty()) throw IoError("manifest " + manifest.string() + " has no train pairs");
  if (pairs.front().x.height != cfg.crop || pairs.front().x.width != cfg.crop) {
    throw ConfigError("config key 'crop' (" + std::to_string(cfg.crop) +
                      ") does not match the dataset images (" +
                      std::to_string(pairs.front().x.height) + ")");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  TrainState state = opts.resume_from ? load_state(*opts.resume_from, cfg, pairs.front().x.channels)
                                      : init_state(cfg, pairs.front().x.channels);
  TrainResult result;
  result.csv = out_dir / "training.csv";
  std::ofstream csv;
  if (opts.resume_from && std::filesystem::exists(result.csv)) {
    // Keep the rows up to the checkpoint, drop anything logged after it.
    std::ifstream old(result.csv);
    std::vector<std::string> kept;
    std::string line;
    std::getline(old, line);
    while (std::getline(old, line)) {
      if (line.empty()) continue;
      if (std::stoll(line.substr(0, line.find(','))) < state.step) kept.push_back(line);
    }
    old.close();
    csv.open(result.csv, std::ios::binary | std::ios::trunc);
    csv << training_csv_header() << '\n';
    for (const auto& l : kept) csv << l << '\n';
  } else {
    csv.open(result.csv, std::ios::binary | std::ios::trunc);
    csv << training_csv_header() << '\n';
  }
  if (!csv) throw IoError("cannot write " + result.csv.string());

  const std::size_t n = pairs.size(), bsz = static_cast<std::size_t>(cfg.batch);
  const int last_epoch = opts.stop_after_epoch ? std::min(cfg.epochs, *opts.stop_after_epoch) : cfg.epochs;
  for (int epoch = state.epoch; epoch < last_epoch; ++epoch) {
    const auto order = epoch_order(cfg.seed, epoch, n);
    for (std::size_t begin = 0; begin < n; begin += bsz) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, begin + bsz)));
      const auto batch = make_batch(pairs, idx);
      const std::int64_t step = state.step;
      const auto bd = train_step(state, batch, cfg);
      csv << training_csv_row(step, epoch, cfg.mode, bd) << '\n';
    }
    csv.flush();
    state.epoch = epoch + 1;
    if (opts.verbose) {
      std::cerr << "epoch " << state.epoch << "/" << cfg.epochs << " step " << state.step << "\n";
    }
    if (cfg.checkpoint_every > 0 && state.epoch % cfg.checkpoint_every == 0) {
      save_state(state, (out_dir / ("epoch_" + std::to_string(state.epoch) + ".ckpt")).string());
    }
  }
  if (!csv) throw IoError("failed writing " + result.csv.string());
  result.final_checkpoint = out_dir / "final.ckpt";
  save_state(state, result.final_checkpoint.string());
  result.steps = state.step;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

MetricsReport evaluate_predictor(const Predictor& predict, const std::vector<LoadedPair>& pairs,
                                 const EvalOptions& opts) {
  MetricsReport report;
  report.rows.resize(pairs.size());
  if (opts.out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*opts.out_dir, ec);
    if (ec) throw IoError("cannot create " + opts.out_dir->string() + ": " + ec.message());
  }
  parallel_for(static_cast<Index>(pairs.size()), opts.threads, [&](Index k) {
    NoGradGuard no_grad;
    const auto& p = pairs[static_cast<std::size_t>(k)];
    const auto pred = predict(from_image8(p.x_aligned));
    const auto target = from_image8(p.y_ideal);
    auto& row = report.rows[static_cast<std::size_t>(k)];
    row.id = p.record.id;
    row.psnr = psnr(pred, target);
    row.ssim = static_cast<double>(ssim_index(pred, target).item());
    const auto heat = mae_heatmap(pred, target);
    row.mae = heat.mae;
    if (opts.out_dir && k < opts.heatmaps) {
      char name[64];
      std::snprintf(name, sizeof name, "heatmap_%06d.png", p.record.id);
      write_png((*opts.out_dir / name).string(), heat.heatmap);
    }
  });
  report.finalize();
  if (opts.out_dir) write_metrics_csv(report, (*opts.out_dir / "metrics.csv").string());
  return report;
}

MetricsReport evaluate(const ModelBundle<float>& bundle, const std::vector<LoadedPair>& pairs,
                       const EvalOptions& opts) {
  freeze_all(bundle);
  auto report = evaluate_predictor(
      [&](const Tensor<float>& x) { return generator_forward(bundle.generator, x); }, pairs, opts);
  if (bundle.r2 && !pairs.empty()) {
    std::vector<FieldStats> self(pairs.size()), cross(pairs.size());
    parallel_for(static_cast<Index>(pairs.size()), opts.threads, [&](Index k) {
      NoGradGuard no_grad;
      const auto& p = pairs[static_cast<std::size_t>(k)];
      const auto x = from_image8(p.x), y = from_image8(p.y);
      const auto gx = generator_forward(bundle.generator, x);
      self[static_cast<std::size_t>(k)] = field_stats(regnet_forward(*bundle.r2, x, gx));
      cross[static_cast<std::size_t>(k)] = field_stats(regnet_forward(*bundle.r2, x, y));
    });
    auto summarize = [](const std::vector<FieldStats>& v) {
      FieldStats s;
      for (const auto& f : v) {
        s.mean_magnitude += f.mean_magnitude;
        s.max_magnitude = std::max(s.max_magnitude, f.max_magnitude);
      }
      s.mean_magnitude /= static_cast<double>(v.size());
      return s;
    };
    report.r2_self = summarize(self);
    report.r2_cross = summarize(cross);
  }
  if (opts.out_dir) {
    std::ofstream out(*opts.out_dir / "report.json", std::ios::binary | std::ios::trunc);
    out << report_json(report) << '\n';
    if (!out) throw IoError("cannot write report.json under " + opts.out_dir->string());
  }
  return report;
}

ModelBundle<float> load_bundle(const std::string& path, Index channels) {
  const auto stored = read_tensors(path);
  NetworkSet which{false, false};
  for (const auto& [name, t] : stored) {
    if (name.rfind("r1.", 0) == 0) which.r1 = true;
    if (name.rfind("r2.", 0) == 0) which.r2 = true;
  }
  auto bundle = init_models<float>(0, channels, which);
  assign_tensors(stored, bundle.named_parameters());
  return bundle;
}

}  // namespace dgr
