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
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgr/config.hpp"
#include "dgr/losses.hpp"
#include "dgr/metrics.hpp"
#include "dgr/nets.hpp"
#include "dgr/optim.hpp"
#include "dgr/synthdata.hpp"

namespace dgr {

/// Raised when a loss or gradient turns non-finite or a loss leaves its range;
/// what() carries the diagnostic dump.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Networks for a mode: baseline G + D, rnr adds R1, dgr adds R1 and R2.
NetworkSet networks_for(TrainMode mode);

/// Models plus one Adam group per network.
struct TrainState {
  ModelBundle<float> bundle;
  Adam<float> opt_g, opt_d;
  std::optional<Adam<float>> opt_r1, opt_r2;
  std::int64_t step = 0;  // completed steps
  int epoch = 0;          // completed epochs

  /// Parameters, moment buffers and counters in checkpoint order.
  NamedParams<float> checkpoint_tensors() const;
};

TrainState init_state(const TrainConfig& cfg, Index channels = 3);

enum class Phase { generator_r1 = 1, registration_r2 = 2, discriminator = 3 };

/// One training step: G+R1, then R2 (dgr only, unless frozen), then D. Each
/// phase clears gradients, enables only its own parameters, runs backward and
/// its Adam update. `after_phase` runs once each phase's update is applied.
LossBreakdown train_step(TrainState& state, const Batch<float>& batch, const TrainConfig& cfg,
                         const std::function<void(Phase)>& after_phase = {});

/// Writes state to `path`; load_state restores it exactly.
void save_state(const TrainState& state, const std::string& path);
TrainState load_state(const std::string& path, const TrainConfig& cfg, Index channels = 3);

/// Training CSV header, matching the per-step rows.
std::string training_csv_header();
std::string training_csv_row(std::int64_t step, int epoch, TrainMode mode, const LossBreakdown& bd);

/// Stacks pairs `indices` of `pairs` into a batch (x = input, y = target).
Batch<float> make_batch(const std::vector<LoadedPair>& pairs, const std::vector<std::size_t>& indices);

/// Sample order of `epoch`; a pure function of (seed, epoch).
std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n);

struct TrainOptions {
  int threads = 1;
  std::optional<std::string> resume_from;
  /// Stop after this many epochs in total (for tests of resume).
  std::optional<int> stop_after_epoch;
  bool verbose = false;
};

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path csv;
  std::int64_t steps = 0;
  double seconds = 0.0;
};

/// Trains on the train split of `manifest`. Writes training.csv (one row per
/// step), epoch checkpoints every cfg.checkpoint_every epochs and final.ckpt.
/// When resuming, rows are appended after the checkpoint's step.
TrainResult run_training(const TrainConfig& cfg, const std::filesystem::path& manifest,
                         const std::filesystem::path& out_dir, const TrainOptions& opts = {});

/// Image-to-image predictor used by evaluation.
using Predictor = std::function<Tensor<float>(const Tensor<float>&)>;

struct EvalOptions {
  int threads = 1;
  std::optional<std::filesystem::path> out_dir;  // per-image CSV + heatmaps when set
  int heatmaps = 4;                              // heatmaps written for the first N images
};

/// Compares predict(x_aligned) with y_ideal for every pair.
MetricsReport evaluate_predictor(const Predictor& predict, const std::vector<LoadedPair>& pairs,
                                 const EvalOptions& opts = {});

/// evaluate_predictor with G, plus R2 field statistics when R2 exists:
/// R2(x, G(x)) and R2(x, y) on the misaligned inputs.
MetricsReport evaluate(const ModelBundle<float>& bundle, const std::vector<LoadedPair>& pairs,
                       const EvalOptions& opts = {});

/// Loads the networks stored in a checkpoint (moments are ignored).
ModelBundle<float> load_bundle(const std::string& path, Index channels = 3);

}  // namespace dgr
