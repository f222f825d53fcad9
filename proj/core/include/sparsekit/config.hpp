// Copyright 2026 The sparsekit Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sparsekit/harness.hpp"
#include "sparsekit/train.hpp"

namespace sparsekit {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string doc;
};

// Every recognised key with its default, in documentation order.
const std::vector<ConfigKey>& config_keys();

// Flat key=value configuration. Lines are `key = value`; `#` starts a
// comment. Unknown keys are rejected. A value containing commas is a sweep
// axis; list-valued keys (lr boundaries, seeds, thresholds) use ':'.
class Config {
 public:
  Config();  // all defaults

  static Config parse(std::string_view text, std::string_view origin = "<string>");
  static Config load(const std::filesystem::path& path);

  void set(std::string_view key, std::string_view value);
  // "key=value"
  void set_assignment(std::string_view assignment);
  const std::string& get(std::string_view key) const;
  bool is_default(std::string_view key) const;

  double get_double(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  std::uint64_t get_uint(std::string_view key) const;
  std::vector<std::string> get_list(std::string_view key) const;  // ':'-separated

  bool is_sweep() const;
  // Cartesian product over comma-valued keys, in key order.
  std::vector<Config> expand() const;

  // FNV-1a over every key that can change a result (seeds, data location and
  // worker counts excluded); stable across runs and platforms.
  std::uint64_t hash() const;
  std::string hash_hex() const;
  // Canonical "key = value" lines for every key.
  std::string to_text() const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

ModelSpec model_from_config(const Config& c);
TrainConfig train_config_from(const Config& c);
ExperimentPlan plan_from_config(const Config& c);

}  // namespace sparsekit
