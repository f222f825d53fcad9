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

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sparsekit/tape.hpp"
#include "sparsekit/tensor.hpp"

namespace sparsekit {

struct GradcheckOptions {
  double step = 1e-5;              // central-difference half width
  std::size_t max_coordinates = 100;  // per parameter, sampled without replacement
  double denominator_floor = 1e-6;    // rel err = |a-n| / max(|a|, |n|, floor)
  std::uint64_t seed = 7;
};

struct GradcheckEntry {
  std::string name;
  std::size_t coordinates = 0;
  double max_rel_error = 0;
  double max_abs_error = 0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;

  double max_rel_error() const {
    double m = 0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
  }
  bool passed(double tolerance) const { return max_rel_error() < tolerance; }
};

struct NamedParam {
  std::string name;
  TensorD* tensor;
};

// Builds the loss on a fresh tape from the current parameter values. Must be
// deterministic: stochastic layers replay pinned noise on every call.
using LossBuilder = std::function<Var<double>(Tape<double>&)>;

// Compares the tape gradient against central finite differences on sampled
// coordinates of each parameter. Parameter values are restored on return.
GradcheckReport gradcheck(const std::vector<NamedParam>& params, const LossBuilder& loss,
                          const GradcheckOptions& options = {});

}  // namespace sparsekit
