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
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dgr/losses.hpp"

namespace dgr {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Values of the supported TOML subset: booleans, integers, floats, basic
/// strings and flat numeric arrays.
using TomlValue = std::variant<bool, std::int64_t, double, std::string, std::vector<double>>;

/// Flat key map; keys inside [table] sections are prefixed "table.".
using TomlTable = std::map<std::string, TomlValue>;

/// Parses `key = value` lines, [table] headers and # comments. Duplicate keys
/// and anything outside the subset are errors carrying the line number.
TomlTable parse_toml(const std::string& text);

struct TrainConfig {
  TrainMode mode = TrainMode::dgr;
  LossWeights weights;
  double lr_g = 5e-5;
  double lr_d = 1e-5;
  double lr_r1 = 1e-5;
  double lr_r2 = 1e-5;
  int epochs = 30;
  int batch = 4;
  std::uint64_t seed = 1;
  int crop = 64;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  bool t1_detach_field = false;
  int checkpoint_every = 5;  // epochs; 0 keeps only the final checkpoint
  bool freeze_r1 = false;    // keep R1 at its initial (identity) output
  bool freeze_r2 = false;    // skip the R2 update phase

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Every key is required; unknown keys are rejected. Errors name the key.
TrainConfig config_from_toml(const std::string& text);
TrainConfig load_config(const std::string& path);

/// Canonical TOML rendering; config_from_toml(to_toml(c)) == c.
std::string to_toml(const TrainConfig& cfg);

/// FNV-1a of the canonical rendering.
std::uint64_t config_hash(const TrainConfig& cfg);

}  // namespace dgr
