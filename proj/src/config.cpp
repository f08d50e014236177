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

#include "dgr/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dgr/hash.hpp"
#include "dgr/image_io.hpp"

namespace dgr {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

double parse_number(const std::string& text, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) {
    throw ConfigError("line " + std::to_string(line_no) + ": cannot parse value '" + text + "'");
  }
  return v;
}

TomlValue parse_value(const std::string& text, std::size_t line_no) {
  if (text == "true") return true;
  if (text == "false") return false;
  if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
    return text.substr(1, text.size() - 2);
  }
  if (text.size() >= 2 && text.front() == '[' && text.back() == ']') {
    std::vector<double> items;
    std::stringstream ss(text.substr(1, text.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) items.push_back(parse_number(item, line_no));
    }
    return items;
  }
  std::string digits = text;
  std::erase(digits, '_');
  const bool integral = digits.find_first_of(".eEnN") == std::string::npos;
  if (integral) {
    std::size_t used = 0;
    try {
      const long long v = std::stoll(digits, &used);
      if (used == digits.size()) return static_cast<std::int64_t>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError("line " + std::to_string(line_no) + ": cannot parse value '" + text + "'");
  }
  return parse_number(digits, line_no);
}

class Reader {
 public:
  explicit Reader(TomlTable table) : table_(std::move(table)) {}

  const TomlValue& at(const std::string& key) {
    auto it = table_.find(key);
    if (it == table_.end()) throw ConfigError("missing config key '" + key + "'");
    used_.insert(key);
    return it->second;
  }
  double number(const std::string& key) {
    const auto& v = at(key);
    if (auto d = std::get_if<double>(&v)) return *d;
    if (auto i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    throw ConfigError("config key '" + key + "' must be a number");
  }
  std::int64_t integer(const std::string& key) {
    if (auto i = std::get_if<std::int64_t>(&at(key))) return *i;
    throw ConfigError("config key '" + key + "' must be an integer");
  }
  bool boolean(const std::string& key) {
    if (auto b = std::get_if<bool>(&at(key))) return *b;
    throw ConfigError("config key '" + key + "' must be true or false");
  }
  std::string string(const std::string& key) {
    if (auto s = std::get_if<std::string>(&at(key))) return *s;
    throw ConfigError("config key '" + key + "' must be a string");
  }
  std::vector<double> array(const std::string& key) {
    if (auto a = std::get_if<std::vector<double>>(&at(key))) return *a;
    throw ConfigError("config key '" + key + "' must be an array");
  }
  void reject_unknown() const {
    for (const auto& [key, value] : table_)
      if (!used_.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }

 private:
  TomlTable table_;
  std::set<std::string> used_;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::string prefix;
  std::stringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": bad table header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!valid_key(name)) throw ConfigError("line " + std::to_string(line_no) + ": bad table name");
      prefix = name + ".";
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ConfigError("line " + std::to_string(line_no) + ": bad key '" + key + "'");
    const std::string full = prefix + key;
    if (table.count(full)) throw ConfigError("duplicate config key '" + full + "'");
    table[full] = parse_value(trim(line.substr(eq + 1)), line_no);
  }
  return table;
}

void TrainConfig::validate() const {
  if (!weights.valid()) throw ConfigError("config key 'weights' must be non-negative");
  const std::pair<const char*, double> lrs[] = {
      {"lr_g", lr_g}, {"lr_d", lr_d}, {"lr_r1", lr_r1}, {"lr_r2", lr_r2}};
  for (const auto& [name, v] : lrs)
    if (!(v > 0.0)) throw ConfigError(std::string("config key '") + name + "' must be > 0");
  if (epochs < 1) throw ConfigError("config key 'epochs' must be >= 1");
  if (batch < 1) throw ConfigError("config key 'batch' must be >= 1");
  if (crop < 16 || crop % 16 != 0) throw ConfigError("config key 'crop' must be a positive multiple of 16");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigError("config key 'adam_betas' must lie in [0, 1)");
  }
  if (checkpoint_every < 0) throw ConfigError("config key 'checkpoint_every' must be >= 0");
}

TrainConfig config_from_toml(const std::string& text) {
  Reader r(parse_toml(text));
  TrainConfig c;
  try {
    c.mode = parse_mode(r.string("mode"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key 'mode': ") + e.what());
  }
  c.weights.alpha = r.number("weights.alpha");
  c.weights.beta = r.number("weights.beta");
  c.weights.gamma = r.number("weights.gamma");
  c.weights.delta = r.number("weights.delta");
  c.weights.epsilon = r.number("weights.epsilon");
  c.lr_g = r.number("lr_g");
  c.lr_d = r.number("lr_d");
  c.lr_r1 = r.number("lr_r1");
  c.lr_r2 = r.number("lr_r2");
  c.epochs = static_cast<int>(r.integer("epochs"));
  c.batch = static_cast<int>(r.integer("batch"));
  const auto seed = r.integer("seed");
  if (seed < 0) throw ConfigError("config key 'seed' must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.crop = static_cast<int>(r.integer("crop"));
  const auto betas = r.array("adam_betas");
  if (betas.size() != 2) throw ConfigError("config key 'adam_betas' must hold two values");
  c.adam_beta1 = betas[0];
  c.adam_beta2 = betas[1];
  c.t1_detach_field = r.boolean("t1_detach_field");
  c.checkpoint_every = static_cast<int>(r.integer("checkpoint_every"));
  c.freeze_r1 = r.boolean("freeze_r1");
  c.freeze_r2 = r.boolean("freeze_r2");
  r.reject_unknown();
  c.validate();
  return c;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_toml(ss.str());
}

std::string to_toml(const TrainConfig& c) {
  std::ostringstream out;
  out << "mode = \"" << to_string(c.mode) << "\"\n"
      << "lr_g = " << fmt(c.lr_g) << "\n"
      << "lr_d = " << fmt(c.lr_d) << "\n"
      << "lr_r1 = " << fmt(c.lr_r1) << "\n"
      << "lr_r2 = " << fmt(c.lr_r2) << "\n"
      << "epochs = " << c.epochs << "\n"
      << "batch = " << c.batch << "\n"
      << "seed = " << c.seed << "\n"
      << "crop = " << c.crop << "\n"
      << "adam_betas = [" << fmt(c.adam_beta1) << ", " << fmt(c.adam_beta2) << "]\n"
      << "t1_detach_field = " << (c.t1_detach_field ? "true" : "false") << "\n"
      << "checkpoint_every = " << c.checkpoint_every << "\n"
      << "freeze_r1 = " << (c.freeze_r1 ? "true" : "false") << "\n"
      << "freeze_r2 = " << (c.freeze_r2 ? "true" : "false") << "\n"
      << "\n[weights]\n"
      << "alpha = " << fmt(c.weights.alpha) << "\n"
      << "beta = " << fmt(c.weights.beta) << "\n"
      << "gamma = " << fmt(c.weights.gamma) << "\n"
      << "delta = " << fmt(c.weights.delta) << "\n"
      << "epsilon = " << fmt(c.weights.epsilon) << "\n";
  return out.str();
}

std::uint64_t config_hash(const TrainConfig& cfg) { return fnv1a(to_toml(cfg)); }

}  // namespace dgr
