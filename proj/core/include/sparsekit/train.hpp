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
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sparsekit/data.hpp"
#include "sparsekit/l0.hpp"
#include "sparsekit/magnitude.hpp"
#include "sparsekit/model.hpp"
#include "sparsekit/optimizer.hpp"
#include "sparsekit/schedule.hpp"

namespace sparsekit {

// Learning rate over steps. Piecewise: base * decay^k in region k, where
// region boundaries are step indices. Linear: base decays linearly to
// base * final_fraction at total_steps. An optional linear warmup from
// base/warmup_steps covers the first warmup_steps steps in both kinds.
struct LrSchedule {
  enum class Kind { Piecewise, Linear };
  Kind kind = Kind::Piecewise;
  double base = 1e-3;
  Step warmup_steps = 0;
  std::vector<Step> boundaries;
  double decay = 0.1;
  double final_fraction = 0.0;  // Linear only
  Step total_steps = 0;         // Linear only

  void validate() const;
  double at(Step t) const;
};

struct TrainConfig {
  Method method = Method::None;
  std::uint64_t seed = 1;
  std::size_t batch_size = 100;
  std::size_t epochs = 20;
  Step steps = 0;  // > 0 overrides epochs
  OptimizerConfig optimizer{};
  LrSchedule lr{};

  // Pruning methods.
  PruningSchedule prune{};
  LayerPolicy policy{};
  GradMode grad_mode = GradMode::Dense;

  // Regularized methods: coefficient(t) = reg_ramp(t) / N_train.
  RampSchedule reg_ramp{};
  double vd_log_sigma2_init = -10.0;
  double vd_threshold = 3.0;
  double vd_log_alpha_clip = 8.0;
  HardConcreteShape hc{};
  double l0_initial_dropout = 0.1;
  // Weight on the expected squared-norm penalty of gated layers; the
  // effective coefficient is this times l0_weight_decay_scale(initial rate).
  double l0_weight_decay = 0.0;

  Step log_every = 100;
  std::size_t eval_batch = 1000;
  std::size_t eval_threads = 1;

  void validate() const;
  Step total_steps(std::size_t train_size) const;
};

struct StepLog {
  Step step = 0;
  double loss = 0;         // total, as computed on the tape
  double task_loss = 0;    // mean cross-entropy
  double regularizer = 0;  // summed KL / expected L0
  double coefficient = 0;
  double decay = 0;        // L0 squared-norm penalty
  double decay_coefficient = 0;
  double lr = 0;
  double batch_accuracy = 0;
};

struct SparsitySample {
  Step step = 0;
  double global = 0;
  std::vector<double> layers;  // per weight layer
};

struct LayerSparsity {
  std::string name;
  std::size_t size = 0;
  std::size_t nonzeros = 0;
  double sparsity = 0;
};

struct TrainingRecord {
  ModelSpec spec;
  TrainConfig config;
  ModelState initial;  // state before step 0
  ModelState final_state;
  std::vector<StepLog> log;
  std::vector<SparsitySample> sparsity_log;
  Step steps_run = 0;
  double train_sparsity = 0;
  double test_sparsity = 0;
  double test_accuracy = -1;  // -1 when no test set was given
  std::vector<LayerSparsity> layers;
  double wall_clock = 0;  // seconds
  bool failed = false;
  std::string failure;
  std::string checkpoint;
};

struct TrainStart {
  std::optional<ModelState> initial;  // replaces the seeded init
  // Non-empty: one frozen mask per weight layer; pruning is disabled and
  // masked weights are held at exactly zero throughout.
  std::vector<SparsityMask> fixed_masks;
};

struct TrainHooks {
  // Called after every optimizer step with the live state.
  std::function<void(Step, const ModelState&)> after_step;
  std::function<void(const StepLog&)> on_log;
};

// Full training loop. Throws NumericalError (with step context) when the
// loss or any intermediate becomes non-finite.
TrainingRecord train(const ModelSpec& spec, const TrainConfig& config, const Dataset& train_data,
                     const Dataset* test_data, const TrainStart& start = {},
                     const TrainHooks& hooks = {});

// Test accuracy of a plain dense state (see effective_state).
double evaluate(const ModelSpec& spec, const ModelState& dense_state, const Dataset& data,
                std::size_t batch = 1000, std::size_t threads = 1);

TestTimeOptions test_time_options(const TrainConfig& config);

// Training-time sparsity: mask fraction for pruning methods, expected-L0
// deficit for L0, thresholded fraction for VD, exact zeros otherwise.
double train_time_sparsity(const ModelSpec& spec, const ModelState& state, const TrainConfig& config);

std::vector<LayerSparsity> layer_sparsity(const ModelSpec& spec,
                                          const std::vector<SparsityMask>& masks);
double global_sparsity(const std::vector<LayerSparsity>& layers);

// Test accuracy / sparsity of a trained state under a config's test-time rule.
struct TestResult {
  double accuracy = 0;
  double sparsity = 0;
  std::vector<LayerSparsity> layers;
};
TestResult test_time_result(const ModelSpec& spec, const ModelState& state,
                            const TestTimeOptions& options, const Dataset& test_data,
                            std::size_t batch = 1000, std::size_t threads = 1);

}  // namespace sparsekit
