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

#include <functional>
#include <string>
#include <vector>

#include "sparsekit/experiment.hpp"
#include "sparsekit/gradcheck.hpp"

namespace sparsekit {

// Reproduction targets. Sparsity and accuracy are fractions.
namespace targets {
inline constexpr double kVdThreshold = 3.0;
inline constexpr double kVdSparsity = 0.95;
inline constexpr double kVdAccuracy = 0.980;
inline constexpr double kSweepSparsity = 0.985;
inline constexpr double kSweepAccuracy = 0.977;
inline constexpr double kLenet5Sparsity = 0.985;
inline constexpr double kLenet5Accuracy = 0.990;
inline constexpr double kGradTolerance = 1e-4;
}  // namespace targets

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  bool informational = false;  // reported, never gated
};

using VerifyLog = std::function<void(const std::string&)>;

// Variational dropout runs behind the reproduction targets.
Config vd_reference_config(const std::string& model);
// Gradual pruning run for the magnitude/random ordering.
Config pruning_reference_config(Method method, double target, std::uint64_t seed);

inline const std::vector<double> kDominanceLevels = {0.5, 0.7, 0.9, 0.95};
inline const std::vector<std::uint64_t> kDominanceSeeds = {1, 2, 3};

// LeNet-300-100: threshold 3 targets, then the threshold trade-off sweep.
// The sweep is returned through `sweep` when non-null.
std::vector<CriterionResult> verify_vd_lenet300(RunCache& cache, const DataSplits& data,
                                                const VerifyLog& log = {},
                                                std::vector<ThresholdPoint>* sweep = nullptr);
CriterionResult verify_vd_lenet5(RunCache& cache, const DataSplits& data, const VerifyLog& log = {});
// Magnitude mean accuracy >= random mean accuracy at every level.
CriterionResult verify_dominance(RunCache& cache, const DataSplits& data, const VerifyLog& log = {});
// Scratch-e retraining under the 90% magnitude masks against the pruned runs.
// Directional only: passes when every run completes.
CriterionResult report_scratch_gap(RunCache& cache, const DataSplits& data, const VerifyLog& log = {});

// Finite-difference checks of the dense, convolutional, masked, variational
// dropout and hard-concrete layers (double precision, pinned noise).
std::vector<GradcheckEntry> gradient_suite();

std::string format_result(const CriterionResult& r);  // "[PASS] 1 name: detail"

}  // namespace sparsekit
