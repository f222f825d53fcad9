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

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sparsekit/checkpoint.hpp"
#include "sparsekit/config.hpp"
#include "sparsekit/data.hpp"
#include "sparsekit/report.hpp"
#include "sparsekit/train.hpp"

namespace sparsekit {

struct DataSplits {
  Dataset train;
  Dataset test;
};

// Resolves data.source / data.dir / limits. Throws ValidationError when the
// MNIST files are missing.
DataSplits load_data(const Config& config);

struct ThresholdPoint {
  double threshold = 0;
  double sparsity = 0;
  double accuracy = 0;
};

// Test-time sparsity and accuracy of one VD state at each log-alpha threshold.
std::vector<ThresholdPoint> threshold_sweep(const ModelSpec& spec, const ModelState& state,
                                            const std::vector<double>& thresholds,
                                            const Dataset& test, std::size_t threads = 1);

std::vector<double> parse_thresholds(const Config& config);  // vd.thresholds

SweepRow sweep_row(const TrainingRecord& run, const Config& config);

// Trains a single (non-sweep) config and returns the record with its
// checkpoint written to `checkpoint` when that is non-empty.
TrainingRecord run_config(const Config& config, const DataSplits& data,
                          const std::filesystem::path& checkpoint = {},
                          const TrainHooks& hooks = {});

// Checkpoints keyed by model, method, config hash and seed. A hit skips
// training; test results are recomputed from the stored weights so stale
// metadata can never leak into a verdict.
class RunCache {
 public:
  explicit RunCache(std::filesystem::path dir);

  std::filesystem::path path_for(const Config& config) const;
  bool contains(const Config& config) const;
  LoadedRun get(const Config& config, const DataSplits& data, const TrainHooks& hooks = {});

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct SweepProgress {
  std::size_t completed = 0;
  std::size_t skipped = 0;  // already present in the CSV
  std::size_t failed = 0;
};

// Expands the grid and trains every point not already in the CSV, using up to
// sweep.workers threads. Rows are appended through one writer as runs finish.
// Diverged runs are counted, not written.
SweepProgress run_sweep(const Config& grid, const DataSplits& data, SweepWriter& writer,
                        const std::filesystem::path& checkpoint_dir = {},
                        const std::function<void(const SweepRow&)>& on_row = {});

}  // namespace sparsekit
