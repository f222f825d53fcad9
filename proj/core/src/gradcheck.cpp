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

#include "sparsekit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sparsekit/rng.hpp"

namespace sparsekit {

GradcheckReport gradcheck(const std::vector<NamedParam>& params, const LossBuilder& loss,
                          const GradcheckOptions& options) {
  {
    Tape<double> tape;
    Var<double> l = loss(tape);
    tape.backward(l);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    analytic.emplace_back(p.tensor->grad().begin(), p.tensor->grad().end());
  }

  auto eval = [&]() {
    Tape<double> tape;
    return loss(tape).value()[0];
  };

  Rng rng(options.seed);
  GradcheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    TensorD& t = *params[pi].tensor;
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    rng.shuffle(coords);
    coords.resize(std::min(coords.size(), options.max_coordinates));

    GradcheckEntry entry{params[pi].name, coords.size(), 0, 0};
    for (std::size_t idx : coords) {
      const double original = t[idx];
      t[idx] = original + options.step;
      const double up = eval();
      t[idx] = original - options.step;
      const double down = eval();
      t[idx] = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[pi][idx];
      const double abs_err = std::abs(a - numeric);
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace sparsekit
