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

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace sparsekit {

using Step = std::int64_t;

// Gradual sparsification: s_t = s_f + (s_i - s_f) * (1 - progress)^3 between
// start_step and end_step, clamped outside. Prune events fire at
// start_step + k * frequency for steps up to end_step.
struct PruningSchedule {
  Step start_step = 0;
  Step end_step = 1;
  Step frequency = 1;
  double initial_sparsity = 0.0;
  double final_sparsity = 0.5;

  void validate() const;
};

double sparsity_at(const PruningSchedule& sched, Step t);
bool is_pruning_event(const PruningSchedule& sched, Step t);
// Target in force at step t: the value computed at the latest event <= t,
// or initial_sparsity before the first event.
double frozen_target_at(const PruningSchedule& sched, Step t);

enum class RampShape { Constant, Linear, Cubic };

RampShape parse_ramp_shape(std::string_view name);
std::string_view to_string(RampShape shape);

// Regularizer-coefficient ramp from 0 to final_value over [start, end].
struct RampSchedule {
  RampShape shape = RampShape::Constant;
  Step start_step = 0;
  Step end_step = 0;
  double final_value = 1.0;

  void validate() const;
};

double ramp_at(const RampSchedule& ramp, Step t);

struct LayerOverride {
  enum class Kind { Uniform, KeepDense, Fixed };
  Kind kind = Kind::Uniform;
  double fraction = 0.0;  // Fixed only
};

// Per-layer exceptions to uniform allocation, e.g. a dense first layer and a
// fixed 80% last layer.
struct LayerPolicy {
  std::map<std::string, LayerOverride> overrides;

  // "fc1=dense:fc3=0.8"; empty string means all-uniform.
  static LayerPolicy parse(std::string_view text);
  std::string to_string() const;
  // Same overrides with every fixed fraction multiplied by factor.
  LayerPolicy scaled(double factor) const;
};

struct LayerSize {
  std::string name;
  std::size_t size = 0;
};

struct LayerTarget {
  std::string name;
  std::size_t size = 0;
  std::size_t zeros = 0;
  double fraction = 0.0;
};

// Splits a global zero budget of floor(global_sparsity * total) weights over
// layers. Uniform layers share one fraction; counts are floored and the
// residual goes to the largest uniform layer. Throws ValidationError when the
// overrides make the budget unreachable.
std::vector<LayerTarget> allocate_layer_targets(const std::vector<LayerSize>& layers,
                                                double global_sparsity,
                                                const LayerPolicy& policy);

// floor(fraction * n) with a small guard against representation error.
std::size_t zeros_for_fraction(double fraction, std::size_t n);

}  // namespace sparsekit
