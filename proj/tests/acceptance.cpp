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

// Acceptance suite: prints one PASS/FAIL line per criterion and exits non-zero
// if any selected criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dgr/bench.hpp"
#include "dgr/gradcheck.hpp"
#include "dgr/losses.hpp"
#include "dgr/metrics.hpp"
#include "dgr/misalign.hpp"
#include "dgr/ops.hpp"
#include "dgr/optim.hpp"
#include "dgr/trainer.hpp"
#include "dgr/warp.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace dgr;
using dgr::testing::random_tensor;

namespace {

// Criterion 1.
constexpr double kGradTolF32 = 1e-3;
constexpr double kGradTolF64 = 1e-6;
constexpr int kGradPoints = 3;
constexpr double kGradBudgetSeconds = 60.0;
// Central-difference steps near cbrt(machine epsilon); the f32 default of 1e-3
// leaves rounding noise close to the tolerance.
constexpr double kStepF32 = 4e-3;
constexpr double kStepF64 = 1e-5;
constexpr double kKinkMargin = 5 * kStepF32;  // |L1 argument| at checked points
// Criterion 2.
constexpr double kSsimOracleTol = 1e-6;
constexpr double kAdamOracleTol = 1e-7;
constexpr int kAdamOracleSteps = 100;
constexpr double kPsnrClosedForm = 20.0;
constexpr double kPsnrTol = 1e-4;
// Criterion 4 and 5 sweep.
constexpr int kSweepTrain = 2000;
constexpr int kSweepTest = 200;
constexpr int kSweepEpochs = 30;
constexpr int kSweepCrop = 64;
constexpr double kSweepBudgetMinutes = 45.0;
const std::vector<int> kSweepLevels = {1, 3, 5};
const std::vector<std::uint64_t> kSweepSeeds = {1, 2, 3};
// Criterion 6.
constexpr double kReductionTol = 1e-6;
constexpr int kReductionSteps = 3;
// Criterion 8.
constexpr double kSmokeBudgetSeconds = 300.0;
constexpr int kSmokeTrain = 200;
constexpr int kSmokeTest = 20;

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Context {
  fs::path cli;
  fs::path work;
  bool full = false;
  std::optional<fs::path> bench_dir;
};

std::string num(double v, int digits = 3) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

struct GradTally {
  int checks = 0;
  double worst = 0.0;
  std::vector<std::string> failures;

  void add(const GradCheckReport& r) {
    ++checks;
    worst = std::max(worst, r.max_rel_error);
    if (!r.passed) failures.push_back(r.op + " (" + num(r.max_rel_error) + ")");
  }
};

// Projects a non-scalar output onto fixed random weights so the check sees a
// smooth scalar.
template <typename S>
std::function<Tensor<S>(const Tensor<S>&)> projected(std::function<Tensor<S>(const Tensor<S>&)> op,
                                                     const Shape& out_shape, std::mt19937_64& rng) {
  const auto w = random_tensor<S>(out_shape, rng, -1, 1);
  return [op, w](const Tensor<S>& t) { return mean(mul(op(t), w)); };
}

// Displacements with fractional parts in [0.2, 0.8] that keep every sample
// inside the image, so no check straddles a bilinear cell edge or the border.
template <typename S>
Tensor<S> interior_field(Index b, Index h, Index w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.2, 0.8);
  Buffer<S> d(b * 2 * h * w);
  for (Index n = 0; n < b; ++n)
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) {
        d[((n * 2) * h + i) * w + j] = S((i < h / 2 ? 1 : -1) * mag(rng));
        d[((n * 2 + 1) * h + i) * w + j] = S((j < w / 2 ? 1 : -1) * mag(rng));
      }
  return Tensor<S>(Shape{b, 2, h, w}, d);
}

// Redraws until every entry of `diff()` is at least `margin` away from zero,
// keeping the L1 terms away from their kink.
template <typename Draw, typename Diff>
void draw_away_from_kink(Draw draw, Diff diff, double margin) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    draw();
    const auto d = diff();
    if ((d.abs().template cast<double>() >= margin).all()) return;
  }
  throw std::runtime_error("could not draw a kink-free point");
}

template <typename S>
void gradient_checks(GradTally& tally, double tol, std::mt19937_64& rng) {
  using Fn = std::function<Tensor<S>(const Tensor<S>&)>;
  const S step = S(sizeof(S) == sizeof(float) ? kStepF32 : kStepF64);
  auto check = [&](const char* name, const Fn& f, const Tensor<S>& point) {
    tally.add(finite_diff_check<S>(name, f, point, tol, {}, step));
  };
  for (int point = 0; point < kGradPoints; ++point) {
    // conv2d: input, kernel and bias at two strides.
    for (Index stride : {Index{1}, Index{2}}) {
      const auto x = random_tensor<S>({1, 2, 6, 6}, rng);
      const auto k = random_tensor<S>({3, 2, 3, 3}, rng);
      const auto b = random_tensor<S>({3}, rng);
      const Shape out{1, 3, (6 + 2 - 3) / stride + 1, (6 + 2 - 3) / stride + 1};
      check("conv2d/input", projected<S>([&](const Tensor<S>& t) { return conv2d(t, k, b, stride, 1); }, out, rng),
          x);
      check("conv2d/kernel", projected<S>([&](const Tensor<S>& t) { return conv2d(x, t, b, stride, 1); }, out, rng),
          k);
      check("conv2d/bias", projected<S>([&](const Tensor<S>& t) { return conv2d(x, k, t, stride, 1); }, out, rng),
          b);
    }

    // Activations; leaky_relu inputs stay clear of zero.
    auto a = random_tensor<S>({2, 3, 4, 4}, rng, -3, 3);
    for (Index i = 0; i < a.size(); ++i)
      if (std::abs(a.data()[i]) < S(0.05)) a.mutable_data()[i] = S(0.5);
    check("leaky_relu", projected<S>([](const Tensor<S>& t) { return leaky_relu(t, S(0.2)); }, a.shape(), rng), a);
    check("sigmoid", projected<S>([](const Tensor<S>& t) { return sigmoid(t); }, a.shape(), rng), a);
    check("tanh", projected<S>([](const Tensor<S>& t) { return dgr::tanh(t); }, a.shape(), rng), a);

    // grid_sample in both arguments.
    const auto img = random_tensor<S>({1, 2, 7, 6}, rng, 0, 1);
    const auto field = interior_field<S>(1, 7, 6, rng);
    check("grid_sample/input",
        projected<S>([&](const Tensor<S>& t) { return grid_sample(t, field); }, img.shape(), rng), img);
    check("grid_sample/field",
        projected<S>([&](const Tensor<S>& t) { return grid_sample(img, t); }, img.shape(), rng), field);

    // ssim_loss in the prediction, the target and the field.
    const auto gx = random_tensor<S>({1, 1, 16, 16}, rng, 0, 1);
    const auto y = random_tensor<S>({1, 1, 16, 16}, rng, 0, 1);
    const auto sf = interior_field<S>(1, 16, 16, rng);
    const DeformationField<S> sfield(sf);
    check("ssim_loss/gx", Fn([&](const Tensor<S>& t) { return ssim_loss(t, y, sfield); }), gx);
    check("ssim_loss/y", Fn([&](const Tensor<S>& t) { return ssim_loss(gx, t, sfield); }), y);
    check("ssim_loss/field",
        Fn([&](const Tensor<S>& t) { return ssim_loss(gx, y, DeformationField<S>(t)); }), sf);

    // smoothness_penalty.
    const auto smooth = random_tensor<S>({2, 2, 5, 4}, rng, -2, 2);
    check("smoothness_penalty",
        Fn([](const Tensor<S>& t) { return smoothness_penalty(DeformationField<S>(t)); }), smooth);

    // Adversarial losses, away from saturated probabilities.
    const auto fake = random_tensor<S>({2, 1, 4, 4}, rng, 0.2, 0.8);
    const auto real = random_tensor<S>({2, 1, 4, 4}, rng, 0.2, 0.8);
    check("adv_generator", Fn([](const Tensor<S>& t) { return adv_generator(t); }), fake);
    check("adv_discriminator/fake", Fn([&](const Tensor<S>& t) { return adv_discriminator(t, real); }), fake);
    check("adv_discriminator/real", Fn([&](const Tensor<S>& t) { return adv_discriminator(fake, t); }), real);

    // T1 in the prediction and the self field.
    Tensor<S> t1x, t1gx, t1f;
    draw_away_from_kink(
        [&] {
          t1x = random_tensor<S>({1, 1, 4, 4}, rng, 0, 1);
          t1gx = random_tensor<S>({1, 1, 4, 4}, rng, 0, 1);
          t1f = interior_field<S>(1, 4, 4, rng);
        },
        [&] {
          NoGradGuard g;
          return Buffer<S>(sub(resample(t1gx, DeformationField<S>(t1f)), t1gx).data());
        },
        kKinkMargin);
    check("t1_loss/gx", Fn([&](const Tensor<S>& t) { return t1_loss(t1x, t, DeformationField<S>(t1f)); }), t1gx);
    check("t1_loss/field", Fn([&](const Tensor<S>& t) { return t1_loss(t1x, t1gx, DeformationField<S>(t)); }), t1f);

    // T2 in the prediction and both fields.
    Tensor<S> t2gx, fc, fr;
    draw_away_from_kink(
        [&] {
          t2gx = random_tensor<S>({1, 1, 4, 4}, rng, 0, 1);
          fc = interior_field<S>(1, 4, 4, rng);
          fr = interior_field<S>(1, 4, 4, rng);
        },
        [&] {
          NoGradGuard g;
          return Buffer<S>(
              sub(resample(t2gx, DeformationField<S>(fc)), resample(t2gx, DeformationField<S>(fr))).data());
        },
        kKinkMargin);
    check("t2_loss/gx",
        Fn([&](const Tensor<S>& t) { return t2_loss(t, DeformationField<S>(fc), DeformationField<S>(fr)); }), t2gx);
    check("t2_loss/cross_field",
        Fn([&](const Tensor<S>& t) { return t2_loss(t2gx, DeformationField<S>(t), DeformationField<S>(fr)); }), fc);
    check("t2_loss/r1_field",
        Fn([&](const Tensor<S>& t) { return t2_loss(t2gx, DeformationField<S>(fc), DeformationField<S>(t)); }), fr);
  }
}

Outcome criterion1(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  GradTally f32, f64;
  gradient_checks<float>(f32, kGradTolF32, rng);
  gradient_checks<double>(f64, kGradTolF64, rng);
  const double secs = seconds_since(t0);
  Outcome o;
  o.passed = f32.failures.empty() && f64.failures.empty() && secs < kGradBudgetSeconds;
  o.detail = std::to_string(f32.checks + f64.checks) + " checks over " + std::to_string(kGradPoints) +
             " points; worst rel err f32 " + num(f32.worst) + " (tol " + num(kGradTolF32) + "), f64 " +
             num(f64.worst) + " (tol " + num(kGradTolF64) + "); " + num(secs) + " s (budget " +
             num(kGradBudgetSeconds) + " s)";
  for (const auto& f : f32.failures) o.detail += "; f32 FAIL " + f;
  for (const auto& f : f64.failures) o.detail += "; f64 FAIL " + f;
  return o;
}

// ---------------------------------------------------------------------------
// 2. Oracle equivalence

Outcome criterion2(const Context&) {
  std::mt19937_64 rng(7);
  std::vector<std::string> failed;

  double ssim_err = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const auto a = random_tensor<double>({1, 3, 24, 24}, rng, 0, 1);
    const auto b = random_tensor<double>({1, 3, 24, 24}, rng, 0, 1);
    const double oracle = dgr::testing::naive_ssim(a, b);
    ssim_err = std::max(ssim_err, std::abs(ssim_index(a, b).item() - oracle));
    ssim_err = std::max(ssim_err, std::abs(double(ssim_index(a.cast<float>(), b.cast<float>()).item()) - oracle));
  }
  if (!(ssim_err <= kSsimOracleTol)) failed.push_back("ssim");

  // Integer shift: out(i, j) = img(i + dy, j + dx) wherever that is in bounds.
  const Index h = 20, w = 17, dy = 3, dx = -2;
  const auto img = random_tensor<float>({1, 2, h, w}, rng, 0, 1);
  Buffer<float> f(2 * h * w);
  f.head(h * w).setConstant(float(dy));
  f.tail(h * w).setConstant(float(dx));
  const auto warped = resample(img, DeformationField<float>(Tensor<float>(Shape{1, 2, h, w}, f)));
  Index mismatches = 0, compared = 0;
  for (Index c = 0; c < 2; ++c)
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) {
        if (i + dy < 0 || i + dy >= h || j + dx < 0 || j + dx >= w) continue;
        ++compared;
        mismatches += warped.data()[(c * h + i) * w + j] != img.data()[(c * h + i + dy) * w + j + dx];
      }
  if (mismatches != 0) failed.push_back("resample");

  const AdamHyper hyper{1e-2, 0.5, 0.999, 1e-8};
  double p[3] = {0.7, -0.2, 1.5}, m[3] = {}, v[3] = {}, ref[3] = {0.7, -0.2, 1.5};
  std::vector<dgr::testing::ScalarAdam> oracle(3, {hyper.lr, hyper.beta1, hyper.beta2, hyper.eps});
  double adam_err = 0.0;
  for (int t = 1; t <= kAdamOracleSteps; ++t) {
    double g[3];
    for (int i = 0; i < 3; ++i) g[i] = std::cos(0.2 * t * (i + 1)) + p[i];
    adam_update(p, g, m, v, 3, hyper, t);
    for (int i = 0; i < 3; ++i) {
      ref[i] = oracle[std::size_t(i)].step(ref[i], std::cos(0.2 * t * (i + 1)) + ref[i]);
      adam_err = std::max(adam_err, std::abs(p[i] - ref[i]));
    }
  }
  if (!(adam_err <= kAdamOracleTol)) failed.push_back("adam");

  const double db = psnr(Tensor<float>::full({1, 3, 16, 16}, 0.45f), Tensor<float>::full({1, 3, 16, 16}, 0.55f));
  if (!(std::abs(db - kPsnrClosedForm) <= kPsnrTol)) failed.push_back("psnr");

  Outcome o;
  o.passed = failed.empty();
  o.detail = "ssim |err| " + num(ssim_err) + " (tol " + num(kSsimOracleTol) + "); resample " +
             std::to_string(mismatches) + " interior mismatches of " + std::to_string(compared) +
             "; adam " + std::to_string(kAdamOracleSteps) + "-step |err| " + num(adam_err) + " (tol " +
             num(kAdamOracleTol) + "); psnr " + num(db, 10) + " dB (want 20 +- " + num(kPsnrTol) + ")";
  for (const auto& f : failed) o.detail += "; FAIL " + f;
  return o;
}

// ---------------------------------------------------------------------------
// 3. Constants from the hyperparameter and ablation tables

Outcome criterion3(const Context&) {
  std::vector<std::string> failed;
  for (int level = 1; level <= 5; ++level) {
    const auto s = level_spec(level);
    const double pct = 0.02 * level;
    if (s.rot_max_deg != double(level) || s.trans_max != pct || s.scale_max != pct)
      failed.push_back("level " + std::to_string(level));
  }
  const LossWeights w;
  if (!(w.alpha == 10.0 && w.beta == 0.5 && w.gamma == 10.0 && w.delta == 0.1 && w.epsilon == 5.0))
    failed.push_back("loss weights");
  const TrainConfig c;
  if (!(c.lr_g == 5e-5 && c.lr_d == 1e-5 && c.lr_r1 == 1e-5 && c.lr_r2 == 1e-5)) failed.push_back("learning rates");
  Outcome o;
  o.passed = failed.empty();
  o.detail = "levels 1-5 = (+-1..5 deg, +-2..10 %, +-2..10 %); weights (10, 0.5, 10, 0.1, 5); lr G 5e-5, D/R1/R2 1e-5";
  for (const auto& f : failed) o.detail += "; FAIL " + f;
  return o;
}

// ---------------------------------------------------------------------------
// 4 and 5. Robustness sweep

// Mean wall-clock seconds of one training step per mode at sweep scale.
std::vector<std::pair<TrainMode, double>> measure_step_seconds() {
  std::vector<std::pair<TrainMode, double>> out;
  std::mt19937_64 rng(3);
  Batch<float> batch{random_tensor<float>({4, 3, kSweepCrop, kSweepCrop}, rng, 0, 1),
                     random_tensor<float>({4, 3, kSweepCrop, kSweepCrop}, rng, 0, 1)};
  for (auto mode : {TrainMode::baseline, TrainMode::rnr, TrainMode::dgr}) {
    TrainConfig cfg;
    cfg.mode = mode;
    auto state = init_state(cfg);
    train_step(state, batch, cfg);
    const auto t0 = std::chrono::steady_clock::now();
    constexpr int kSteps = 2;
    for (int i = 0; i < kSteps; ++i) train_step(state, batch, cfg);
    out.emplace_back(mode, seconds_since(t0) / kSteps);
  }
  return out;
}

BenchOptions sweep_options() {
  BenchOptions o;
  o.levels = kSweepLevels;
  o.seeds = kSweepSeeds;
  o.train.epochs = kSweepEpochs;
  o.train.crop = kSweepCrop;
  o.data.n_train = kSweepTrain;
  o.data.n_test = kSweepTest;
  o.verbose = true;
  return o;
}

std::optional<BenchResult> sweep_result(const Context& ctx, std::string& note) {
  if (ctx.bench_dir) {
    note = "from " + (*ctx.bench_dir / "bench.csv").string();
    return read_bench_csv(*ctx.bench_dir / "bench.csv");
  }
  const auto dir = ctx.work / "sweep";
  if (fs::exists(dir / "bench.csv")) {
    note = "from " + (dir / "bench.csv").string();
    return read_bench_csv(dir / "bench.csv");
  }
  if (ctx.full) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = run_bench(sweep_options(), dir);
    note = "sweep ran in " + num(seconds_since(t0) / 60.0) + " min (budget " + num(kSweepBudgetMinutes) + " min)";
    return r;
  }
  const auto per_step = measure_step_seconds();
  const double steps_per_cell = double(kSweepEpochs) * std::ceil(double(kSweepTrain) / 4.0);
  const double cells_per_mode = double(kSweepLevels.size() * kSweepSeeds.size());
  double total = 0.0;
  std::string breakdown;
  for (const auto& [mode, s] : per_step) {
    total += s * steps_per_cell * cells_per_mode;
    breakdown += (breakdown.empty() ? "" : ", ") + to_string(mode) + " " + num(s) + " s/step";
  }
  note = "not run: the sweep (3 modes x 3 levels x 3 seeds, " + num(steps_per_cell, 6) +
         " steps per cell) needs about " + num(total / 3600.0) + " h of training on this machine (" +
         breakdown + ") against a " + num(kSweepBudgetMinutes) +
         " min budget; rerun with --full or --bench-dir";
  return std::nullopt;
}

Outcome criterion4(const Context& ctx) {
  std::string note;
  const auto result = sweep_result(ctx, note);
  if (!result) return {false, note};
  Outcome o{true, note};
  for (const auto& c : assess_trends(*result)) {
    o.passed = o.passed && c.passed;
    o.detail += "; " + std::string(c.passed ? "ok " : "FAIL ") + c.name + " [" + c.detail + "]";
  }
  return o;
}

Outcome criterion5(const Context& ctx) {
  std::string note;
  const auto result = sweep_result(ctx, note);
  if (!result) return {false, note};
  const auto c = assess_decoupling(*result);
  return {c.passed, note + "; " + c.name + " [" + c.detail + "]"};
}

// ---------------------------------------------------------------------------
// 6. Mode reduction

// Compares the terms both objectives compute; baseline never logs SSIM or
// the R1 smoothness term.
double max_breakdown_diff(const LossBreakdown& a, const LossBreakdown& b, bool registration_terms) {
  std::vector<std::pair<double, double>> terms = {
      {a.l1, b.l1}, {a.adv, b.adv}, {a.total_g_r1, b.total_g_r1}, {a.total_d, b.total_d}};
  if (registration_terms) {
    terms.emplace_back(a.ssim, b.ssim);
    terms.emplace_back(a.smooth_r1, b.smooth_r1);
  }
  double d = 0.0;
  for (auto [x, y] : terms) d = std::max(d, std::abs(x - y));
  return d;
}

Outcome criterion6(const Context&) {
  std::mt19937_64 rng(6);
  std::vector<Batch<float>> batches;
  for (int i = 0; i < kReductionSteps; ++i)
    batches.push_back({random_tensor<float>({2, 3, 32, 32}, rng, 0, 1), random_tensor<float>({2, 3, 32, 32}, rng, 0, 1)});
  auto run = [&](TrainConfig a_cfg, TrainConfig b_cfg, bool registration_terms) {
    a_cfg.crop = b_cfg.crop = 32;
    auto a = init_state(a_cfg), b = init_state(b_cfg);
    double worst = 0.0;
    for (const auto& batch : batches)
      worst = std::max(worst, max_breakdown_diff(train_step(a, batch, a_cfg), train_step(b, batch, b_cfg),
                                                  registration_terms));
    return worst;
  };
  TrainConfig dgr_cfg, rnr_cfg, rnr_frozen, base_cfg;
  dgr_cfg.mode = TrainMode::dgr;
  dgr_cfg.weights.epsilon = 0.0;
  dgr_cfg.freeze_r2 = true;
  rnr_cfg.mode = TrainMode::rnr;
  rnr_frozen.mode = TrainMode::rnr;
  rnr_frozen.freeze_r1 = true;
  rnr_frozen.weights.beta = rnr_frozen.weights.gamma = 0.0;
  base_cfg.mode = TrainMode::baseline;
  const double d1 = run(dgr_cfg, rnr_cfg, true), d2 = run(rnr_frozen, base_cfg, false);
  return {d1 <= kReductionTol && d2 <= kReductionTol,
          "dgr(eps=0, R2 frozen) vs rnr max |diff| " + num(d1) + ", rnr(R1 frozen, beta=gamma=0) vs baseline " +
              num(d2) + " over " + std::to_string(kReductionSteps) + " steps (tol " + num(kReductionTol) + ")"};
}

// ---------------------------------------------------------------------------
// 7. Determinism of the bench command

void write_config(const fs::path& path, int epochs, int crop) {
  TrainConfig c;
  c.epochs = epochs;
  c.crop = crop;
  c.checkpoint_every = 0;
  std::ofstream(path) << to_toml(c);
}

Outcome criterion7(const Context& ctx) {
  const auto dir = ctx.work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string args;
  std::string scale;
  if (ctx.full) {
    write_config(dir / "bench.toml", kSweepEpochs, kSweepCrop);
    args = " --n-train " + std::to_string(kSweepTrain) + " --n-test " + std::to_string(kSweepTest) +
           " --seeds 1,2,3";
    scale = "full sweep";
  } else {
    write_config(dir / "bench.toml", 1, 32);
    args = " --n-train 8 --n-test 4 --seeds 1,2";
    scale = "reduced sweep: 8 train / 4 test pairs, 32 px, 1 epoch, seeds 1,2";
  }
  const std::string base = ctx.cli.string() + " --threads 1 bench --modes baseline,rnr,dgr --levels 1,3,5 --config " +
                           (dir / "bench.toml").string() + args + " --out ";
  int codes[2];
  for (int k = 0; k < 2; ++k) {
    const auto out = dir / ("run" + std::to_string(k));
    codes[k] = run_command(base + out.string() + " >" + (dir / ("run" + std::to_string(k) + ".log")).string() + " 2>&1");
  }
  const std::string a = dgr::testing::slurp(dir / "run0" / "bench.csv");
  const std::string b = dgr::testing::slurp(dir / "run1" / "bench.csv");
  std::size_t rows = 0;
  for (char c : a) rows += c == '\n';
  const bool same = !a.empty() && a == b;
  return {codes[0] == 0 && codes[1] == 0 && same && rows == 1 + 9 * (ctx.full ? 3 : 2),
          scale + "; exit codes " + std::to_string(codes[0]) + "/" + std::to_string(codes[1]) + "; bench.csv " +
              (same ? "byte-identical" : "DIFFERS") + " (" + std::to_string(a.size()) + " bytes, " +
              std::to_string(rows) + " lines)"};
}

// ---------------------------------------------------------------------------
// 8. End-to-end smoke

Outcome criterion8(const Context& ctx) {
  const auto dir = ctx.work / "smoke";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_config(dir / "smoke.toml", 2, 64);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string log = " >>" + (dir / "smoke.log").string() + " 2>&1";
  const int synth = run_command(ctx.cli.string() + " synth --level 3 --n-train " + std::to_string(kSmokeTrain) +
                                " --n-test " + std::to_string(kSmokeTest) + " --out " + (dir / "data").string() + log);
  const int train = synth != 0 ? -1
                               : run_command(ctx.cli.string() + " train --config " + (dir / "smoke.toml").string() +
                                             " --data " + (dir / "data").string() + " --out " +
                                             (dir / "run").string() + log);
  const int eval = train != 0 ? -1
                              : run_command(ctx.cli.string() + " eval --ckpt " + (dir / "run" / "final.ckpt").string() +
                                            " --data " + (dir / "data").string() + " --out " +
                                            (dir / "eval").string() + log);
  const double secs = seconds_since(t0);

  std::size_t rows = 0;
  bool finite = true;
  if (train == 0) {
    std::istringstream csv(dgr::testing::slurp(dir / "run" / "training.csv"));
    std::string line;
    std::getline(csv, line);
    while (std::getline(csv, line)) {
      ++rows;
      std::stringstream ss(line);
      std::string cell;
      for (int col = 0; std::getline(ss, cell, ','); ++col)
        if (col >= 3 && !std::isfinite(std::stod(cell))) finite = false;
    }
  }
  double psnr_mean = NAN;
  if (eval == 0) {
    MetricsReport r;
    r.rows = read_metrics_csv((dir / "eval" / "metrics.csv").string());
    r.finalize();
    psnr_mean = r.psnr.mean;
  }
  const std::size_t want_rows = 2 * std::size_t((kSmokeTrain + 3) / 4);
  return {synth == 0 && train == 0 && eval == 0 && finite && rows == want_rows && std::isfinite(psnr_mean) &&
              secs < kSmokeBudgetSeconds,
          "exit codes synth/train/eval " + std::to_string(synth) + "/" + std::to_string(train) + "/" +
              std::to_string(eval) + "; " + std::to_string(rows) + " training rows, losses " +
              (finite ? "finite" : "NOT finite") + "; eval psnr " + num(psnr_mean, 4) + " dB; " + num(secs) +
              " s (budget " + num(kSmokeBudgetSeconds) + " s)"};
}

const char* const kNames[] = {"",
                              "gradient correctness",
                              "oracle equivalence",
                              "constant fidelity",
                              "robustness trends",
                              "anti-laziness probe",
                              "mode reduction",
                              "determinism",
                              "end-to-end smoke"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::vector<int> criteria;
  std::string cli, work = "acceptance_work", bench_dir;
  bool full = false;
  app.add_option("--criterion", criteria, "Criteria to run (default: all)")->check(CLI::Range(1, 8));
  app.add_option("--cli", cli, "Path to the dgr binary")->required();
  app.add_option("--work", work, "Scratch directory");
  app.add_flag("--full", full, "Run the full-scale sweep for criteria 4, 5 and 7");
  app.add_option("--bench-dir", bench_dir, "Assess criteria 4 and 5 on an existing bench output");
  CLI11_PARSE(app, argc, argv);
  if (criteria.empty()) criteria = {1, 2, 3, 4, 5, 6, 7, 8};

  Context ctx;
  ctx.cli = fs::absolute(cli);
  ctx.work = fs::absolute(work);
  ctx.full = full;
  if (!bench_dir.empty()) ctx.bench_dir = fs::absolute(bench_dir);
  fs::create_directories(ctx.work);

  const std::function<Outcome(const Context&)> run[] = {nullptr,    criterion1, criterion2, criterion3, criterion4,
                                                        criterion5, criterion6, criterion7, criterion8};
  bool all = true;
  for (int c : criteria) {
    Outcome o;
    try {
      o = run[c](ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("[%s] criterion %d (%s): %s\n", o.passed ? "PASS" : "FAIL", c, kNames[c], o.detail.c_str());
    std::fflush(stdout);
    all = all && o.passed;
  }
  return all ? 0 : 1;
}
