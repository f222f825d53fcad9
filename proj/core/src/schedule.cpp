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

#include "sparsekit/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sparsekit/errors.hpp"

namespace sparsekit {

void PruningSchedule::validate() const {
  if (start_step < 0) throw ValidationError("prune.start_step must be >= 0");
  if (end_step <= start_step) throw ValidationError("prune.end_step must exceed prune.start_step");
  if (frequency < 1) throw ValidationError("prune.frequency must be >= 1");
  if (!(initial_sparsity >= 0.0 && initial_sparsity < 1.0)) {
    throw ValidationError("prune.initial_sparsity must lie in [0, 1)");
  }
  if (!(final_sparsity >= initial_sparsity && final_sparsity <= 1.0)) {
    throw ValidationError("prune.final_sparsity must lie in [initial_sparsity, 1]");
  }
}

double sparsity_at(const PruningSchedule& s, Step t) {
  if (t <= s.start_step) return s.initial_sparsity;
  if (t >= s.end_step) return s.final_sparsity;
  const double progress = static_cast<double>(t - s.start_step) /
                          static_cast<double>(s.end_step - s.start_step);
  const double remaining = 1.0 - progress;
  return s.final_sparsity + (s.initial_sparsity - s.final_sparsity) * remaining * remaining * remaining;
}

bool is_pruning_event(const PruningSchedule& s, Step t) {
  return t >= s.start_step && t <= s.end_step && (t - s.start_step) % s.frequency == 0;
}

double frozen_target_at(const PruningSchedule& s, Step t) {
  if (t < s.start_step) return s.initial_sparsity;
  const Step last = std::min(t, s.end_step);
  const Step event = s.start_step + ((last - s.start_step) / s.frequency) * s.frequency;
  return sparsity_at(s, event);
}

RampShape parse_ramp_shape(std::string_view name) {
  if (name == "constant") return RampShape::Constant;
  if (name == "linear") return RampShape::Linear;
  if (name == "cubic") return RampShape::Cubic;
  throw ValidationError("unknown ramp shape '" + std::string(name) + "'");
}

std::string_view to_string(RampShape shape) {
  switch (shape) {
    case RampShape::Constant: return "constant";
    case RampShape::Linear: return "linear";
    case RampShape::Cubic: return "cubic";
  }
  return "constant";
}

void RampSchedule::validate() const {
  if (start_step < 0 || end_step < start_step) {
    throw ValidationError("ramp steps must satisfy 0 <= start <= end");
  }
  if (!(final_value >= 0.0) || !std::isfinite(final_value)) {
    throw ValidationError("ramp final coefficient must be finite and >= 0");
  }
}

double ramp_at(const RampSchedule& r, Step t) {
  if (r.shape == RampShape::Constant || t >= r.end_step) return r.final_value;
  if (t <= r.start_step) return 0.0;
  const double p = static_cast<double>(t - r.start_step) /
                   static_cast<double>(r.end_step - r.start_step);
  if (r.shape == RampShape::Linear) return r.final_value * p;
  const double q = 1.0 - p;
  return r.final_value * (1.0 - q * q * q);
}

LayerPolicy LayerPolicy::parse(std::string_view text) {
  LayerPolicy policy;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(':', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view item = text.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ValidationError("layer override '" + std::string(item) + "' is not name=value");
    }
    std::string name(item.substr(0, eq));
    std::string value(item.substr(eq + 1));
    LayerOverride o;
    if (value == "dense") {
      o.kind = LayerOverride::Kind::KeepDense;
    } else if (value == "uniform") {
      o.kind = LayerOverride::Kind::Uniform;
    } else {
      std::size_t used = 0;
      double f = 0;
      try {
        f = std::stod(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != value.size() || !(f >= 0.0 && f <= 1.0)) {
        throw ValidationError("layer override fraction for '" + name + "' must be in [0, 1]");
      }
      o.kind = LayerOverride::Kind::Fixed;
      o.fraction = f;
    }
    policy.overrides[name] = o;
  }
  return policy;
}

std::string LayerPolicy::to_string() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [name, o] : overrides) {
    if (!first) os << ':';
    first = false;
    os << name << '=';
    switch (o.kind) {
      case LayerOverride::Kind::KeepDense: os << "dense"; break;
      case LayerOverride::Kind::Uniform: os << "uniform"; break;
      case LayerOverride::Kind::Fixed: os << o.fraction; break;
    }
  }
  return os.str();
}

LayerPolicy LayerPolicy::scaled(double factor) const {
  LayerPolicy out = *this;
  for (auto& [name, o] : out.overrides) {
    if (o.kind == LayerOverride::Kind::Fixed) o.fraction = std::clamp(o.fraction * factor, 0.0, 1.0);
  }
  return out;
}

std::size_t zeros_for_fraction(double fraction, std::size_t n) {
  const double z = std::floor(fraction * static_cast<double>(n) + 1e-7);
  return static_cast<std::size_t>(std::clamp(z, 0.0, static_cast<double>(n)));
}

std::vector<LayerTarget> allocate_layer_targets(const std::vector<LayerSize>& layers,
                                                double global_sparsity,
                                                const LayerPolicy& policy) {
  if (!(global_sparsity >= 0.0 && global_sparsity <= 1.0)) {
    throw ValidationError("global sparsity must lie in [0, 1]");
  }
  for (const auto& [name, o] : policy.overrides) {
    const bool known = std::any_of(layers.begin(), layers.end(),
                                   [&](const LayerSize& l) { return l.name == name; });
    if (!known) throw ValidationError("layer override names unknown layer '" + name + "'");
  }

  std::vector<LayerTarget> out;
  std::size_t total = 0;
  std::size_t override_zeros = 0;
  std::size_t uniform_total = 0;
  std::vector<std::size_t> uniform_idx;
  for (const auto& l : layers) {
    if (l.size == 0) throw ValidationError("layer '" + l.name + "' has zero size");
    total += l.size;
    LayerTarget t{l.name, l.size, 0, 0.0};
    auto it = policy.overrides.find(l.name);
    const auto kind = it == policy.overrides.end() ? LayerOverride::Kind::Uniform : it->second.kind;
    if (kind == LayerOverride::Kind::Fixed) {
      t.zeros = zeros_for_fraction(it->second.fraction, l.size);
      override_zeros += t.zeros;
    } else if (kind == LayerOverride::Kind::Uniform) {
      uniform_total += l.size;
      uniform_idx.push_back(out.size());
    }
    out.push_back(std::move(t));
  }

  const std::size_t budget = zeros_for_fraction(global_sparsity, total);
  if (override_zeros > budget) {
    throw ValidationError("infeasible sparsity allocation: overrides alone exceed the global budget");
  }
  const std::size_t remaining = budget - override_zeros;
  if (remaining > uniform_total) {
    throw ValidationError("infeasible sparsity allocation: uniform fraction would exceed 1");
  }
  if (remaining > 0 && uniform_idx.empty()) {
    throw ValidationError("infeasible sparsity allocation: no uniform layers left to prune");
  }

  if (!uniform_idx.empty()) {
    const double fraction = static_cast<double>(remaining) / static_cast<double>(uniform_total);
    std::size_t assigned = 0;
    for (std::size_t i : uniform_idx) {
      out[i].zeros = zeros_for_fraction(fraction, out[i].size);
      assigned += out[i].zeros;
    }
    std::size_t residual = remaining > assigned ? remaining - assigned : 0;
    std::vector<std::size_t> by_size = uniform_idx;
    std::stable_sort(by_size.begin(), by_size.end(),
                     [&](std::size_t a, std::size_t b) { return out[a].size > out[b].size; });
    for (std::size_t i : by_size) {
      if (residual == 0) break;
      const std::size_t room = out[i].size - out[i].zeros;
      const std::size_t take = std::min(room, residual);
      out[i].zeros += take;
      residual -= take;
    }
  }
  for (auto& t : out) t.fraction = static_cast<double>(t.zeros) / static_cast<double>(t.size);
  return out;
}

}  // namespace sparsekit
