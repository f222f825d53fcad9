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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sparsekit/train.hpp"

namespace sparsekit {

enum class Variant { Lottery, ScratchE, ScratchB };
enum class Reinit { OriginalInit, FreshStandard, FreshNnzScaled };
// Learning-rate handling for the retraining budget:
//   standard        base schedule unchanged
//   scaled-regions  every region (and the warmup) lasts twice as long
//   extended-final  base schedule, final rate held for the extra steps
//   repeated-decay  base warmup, then x decay every decay_period steps
//   repeated-decay-no-warmup  same without the warmup
enum class LrScheme { Standard, ScaledRegions, ExtendedFinal, RepeatedDecay, RepeatedDecayNoWarmup };

Variant parse_variant(std::string_view name);
Reinit parse_reinit(std::string_view name);
LrScheme parse_lr_scheme(std::string_view name);
std::string_view to_string(Variant v);
std::string_view to_string(Reinit r);
std::string_view to_string(LrScheme s);

struct ExperimentPlan {
  std::string base_checkpoint;  // informational: where the masks came from
  Variant variant = Variant::ScratchE;
  Reinit reinit = Reinit::FreshStandard;
  LrScheme lr_scheme = LrScheme::Standard;
  std::size_t replicas_outer = 1;  // independent base runs / masks
  std::size_t replicas_inner = 1;  // retraining replicas per mask
  std::vector<std::uint64_t> seeds;
  Step decay_period = 0;  // repeated-decay; 0 means a third of the base steps
  Step check_every = 100;  // mask-immutability assertion period

  // Lottery needs the original init; scratch variants need a fresh one.
  void validate() const;
  Step steps_for(Step base_steps) const;  // scratch-b doubles
};

struct MaskSnapshot {
  std::vector<std::string> layers;
  std::vector<SparsityMask> masks;  // one per weight layer
  std::string source;
  double sparsity = 0;
};

// Initial (pre-step-0) state and final learned masks of a pruning run.
std::pair<ModelState, MaskSnapshot> capture(const TrainingRecord& run, std::string source = "");

// Standard Glorot-uniform init with each layer's variance multiplied by
// total / nonzero weights of its mask.
ModelState reinit_nnz_scaled(const ModelSpec& spec, const MaskSnapshot& masks, const Rng& rng);

LrSchedule lr_for_scheme(const LrSchedule& base, LrScheme scheme, Step base_steps,
                         Step decay_period = 0);

// Sparse retraining under frozen masks. Divergence is recorded in the
// returned record (failed = true) instead of being thrown.
TrainingRecord run_variant(const ModelSpec& spec, const ExperimentPlan& plan,
                           const MaskSnapshot& masks, const ModelState* original_init,
                           const TrainConfig& base_config, const Dataset& train_data,
                           const Dataset* test_data, std::uint64_t seed);

struct VariantRun {
  std::string variant;  // e.g. "scratch-b/fresh-nnz-scaled"
  double sparsity_level = 0;
  TrainingRecord record;
};

std::string variant_label(const ExperimentPlan& plan);

struct ComparisonRow {
  std::string variant;
  double sparsity_level = 0;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double mean = 0, min = 0, max = 0;
  double baseline = 0;  // mean accuracy of the pruned-during-training runs
  double gap = 0;       // baseline - mean (positive favours the baseline)
};

// Rows ordered by (sparsity level, variant); levels are matched to 1e-3.
std::vector<ComparisonRow> compare(const std::vector<VariantRun>& runs,
                                   const std::vector<VariantRun>& baselines);

}  // namespace sparsekit
