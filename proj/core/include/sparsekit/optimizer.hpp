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

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sparsekit/errors.hpp"
#include "sparsekit/tensor.hpp"

namespace sparsekit {

enum class OptimizerKind { SgdMomentum, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;  // SGD only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// SGD-momentum (v = mu*v + g; w -= lr*v) or Adam with bias correction. Slots
// are keyed by position in the parameter list, which must be passed in the
// same order on every step.
template <class T>
class BasicOptimizer {
 public:
  explicit BasicOptimizer(OptimizerConfig config) : config_(config) {
    if (!(config_.learning_rate > 0) || !std::isfinite(config_.learning_rate)) {
      throw ValidationError("optimizer learning rate must be finite and > 0");
    }
  }

  const OptimizerConfig& config() const noexcept { return config_; }
  std::uint64_t steps() const noexcept { return steps_; }

  void step(std::span<BasicTensor<T>* const> params) { step(params, config_.learning_rate); }

  // One update using each parameter's grad slot, with an explicit learning
  // rate (for schedules).
  void step(std::span<BasicTensor<T>* const> params, double lr) {
    if (!std::isfinite(lr)) throw ValidationError("optimizer learning rate must be finite");
    if (first_.empty()) {
      first_.resize(params.size());
      second_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        first_[i].assign(params[i]->size(), 0.0);
        if (config_.kind == OptimizerKind::Adam) second_[i].assign(params[i]->size(), 0.0);
      }
    }
    if (params.size() != first_.size()) throw ValidationError("optimizer: parameter list changed");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i]->size() != first_[i].size()) {
        throw ValidationError("optimizer: slot shape mismatch for parameter " + std::to_string(i));
      }
      if (params[i]->has_grad() && params[i]->grad().size() != params[i]->size()) {
        throw ValidationError("optimizer: grad shape mismatch for parameter " + std::to_string(i));
      }
    }
    ++steps_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      BasicTensor<T>& p = *params[i];
      if (!p.has_grad()) continue;
      auto w = p.data();
      auto g = p.grad();
      auto& m = first_[i];
      if (config_.kind == OptimizerKind::SgdMomentum) {
        for (std::size_t k = 0; k < w.size(); ++k) {
          m[k] = config_.momentum * m[k] + g[k];
          w[k] = static_cast<T>(w[k] - lr * m[k]);
        }
      } else {
        auto& v = second_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
          const double gk = g[k];
          m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * gk;
          v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * gk * gk;
          const double update = (m[k] / bc1) / (std::sqrt(v[k] / bc2) + config_.epsilon);
          w[k] = static_cast<T>(w[k] - lr * update);
        }
      }
    }
  }

 private:
  OptimizerConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

using Optimizer = BasicOptimizer<float>;

}  // namespace sparsekit
