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
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sparsekit/harness.hpp"
#include "sparsekit/model.hpp"
#include "sparsekit/train.hpp"

namespace sparsekit {

// FLOP convention used by every report: one multiply-accumulate = 2 FLOPs.
// Bias adds, activations and pooling are not counted.
inline constexpr const char* kFlopConvention = "flops: multiply-accumulate = 2 FLOPs; biases/activations excluded";

// Forward-pass FLOPs of one sample given per-weight-layer masks.
std::uint64_t count_flops(const ModelSpec& spec, const std::vector<SparsityMask>& masks);
// Same with (possibly fractional) effective nonzero counts per weight layer.
double count_flops(const ModelSpec& spec, const std::vector<double>& effective_nonzeros);
std::uint64_t count_dense_flops(const ModelSpec& spec);
// Training-time FLOPs of a gated model: effective count = expected L0.
double l0_expected_flops(const ModelSpec& spec, const ModelState& state, const HardConcreteShape& hc);

struct SweepRow {
  std::string method;
  double sparsity_target = 0;
  double train_sparsity = 0;
  double test_sparsity = 0;
  double test_accuracy = 0;
  double reg_coefficient = 0;
  double threshold = 0;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  double wall_clock = 0;
  std::string config_hash;

  static const std::string& csv_header();
  std::string to_csv() const;
  static SweepRow from_csv(const std::string& line);
};

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);
std::string sweep_csv(const std::vector<SweepRow>& rows);  // header + rows

// Append-only sweep CSV. Writes the header on creation; rejects a second
// row with the same (config_hash, seed). Safe to share between threads.
class SweepWriter {
 public:
  explicit SweepWriter(std::filesystem::path path);
  // Returns false (and writes nothing) for an already-present key.
  bool append(const SweepRow& row);
  bool contains(const std::string& config_hash, std::uint64_t seed) const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::set<std::pair<std::string, std::uint64_t>> keys_;
};

// Rows not dominated in (higher test sparsity, higher accuracy), sorted by
// sparsity then accuracy. Rows must share one method.
std::vector<SweepRow> pareto_frontier(const std::vector<SweepRow>& rows);
// x,y series (sparsity, accuracy) for plotting.
std::string frontier_series_csv(const std::vector<SweepRow>& frontier);

struct DistributionRow {
  std::string name;
  std::size_t size = 0;
  std::size_t nonzeros = 0;
  double sparsity = 0;
  std::uint64_t flops = 0;
};

struct DistributionReport {
  std::vector<DistributionRow> layers;
  DistributionRow global;  // name "global"
};

DistributionReport sparsity_distribution_report(const ModelSpec& spec,
                                                const std::vector<SparsityMask>& masks);
std::string distribution_csv(const DistributionReport& report);

std::string comparison_csv(const std::vector<ComparisonRow>& rows);

}  // namespace sparsekit
