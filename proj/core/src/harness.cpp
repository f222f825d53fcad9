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

#include "sparsekit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace sparsekit {

Variant parse_variant(std::string_view name) {
  if (name == "lottery") return Variant::Lottery;
  if (name == "scratch-e") return Variant::ScratchE;
  if (name == "scratch-b") return Variant::ScratchB;
  throw ValidationError("unknown variant '" + std::string(name) + "' (lottery|scratch-e|scratch-b)");
}

Reinit parse_reinit(std::string_view name) {
  if (name == "original-init") return Reinit::OriginalInit;
  if (name == "fresh-standard") return Reinit::FreshStandard;
  if (name == "fresh-nnz-scaled") return Reinit::FreshNnzScaled;
  throw ValidationError("unknown reinit '" + std::string(name) +
                        "' (original-init|fresh-standard|fresh-nnz-scaled)");
}

LrScheme parse_lr_scheme(std::string_view name) {
  if (name == "standard") return LrScheme::Standard;
  if (name == "scaled-regions") return LrScheme::ScaledRegions;
  if (name == "extended-final") return LrScheme::ExtendedFinal;
  if (name == "repeated-decay") return LrScheme::RepeatedDecay;
  if (name == "repeated-decay-no-warmup") return LrScheme::RepeatedDecayNoWarmup;
  throw ValidationError("unknown lr scheme '" + std::string(name) + "'");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Lottery: return "lottery";
    case Variant::ScratchE: return "scratch-e";
    case Variant::ScratchB: return "scratch-b";
  }
  return "";
}

std::string_view to_string(Reinit r) {
  switch (r) {
    case Reinit::OriginalInit: return "original-init";
    case Reinit::FreshStandard: return "fresh-standard";
    case Reinit::FreshNnzScaled: return "fresh-nnz-scaled";
  }
  return "";
}

std::string_view to_string(LrScheme s) {
  switch (s) {
    case LrScheme::Standard: return "standard";
    case LrScheme::ScaledRegions: return "scaled-regions";
    case LrScheme::ExtendedFinal: return "extended-final";
    case LrScheme::RepeatedDecay: return "repeated-decay";
    case LrScheme::RepeatedDecayNoWarmup: return "repeated-decay-no-warmup";
  }
  return "";
}

void ExperimentPlan::validate() const {
  if (variant == Variant::Lottery && reinit != Reinit::OriginalInit) {
    throw ValidationError("lottery variant requires reinit = original-init");
  }
  if (variant != Variant::Lottery && reinit == Reinit::OriginalInit) {
    throw ValidationError("scratch variants require a fresh reinit");
  }
  if (replicas_outer == 0 || replicas_inner == 0) throw ValidationError("replica counts must be > 0");
  if (decay_period < 0) throw ValidationError("decay_period must be >= 0");
  if (check_every <= 0) throw ValidationError("check_every must be > 0");
}

Step ExperimentPlan::steps_for(Step base_steps) const {
  return variant == Variant::ScratchB ? 2 * base_steps : base_steps;
}

std::string variant_label(const ExperimentPlan& plan) {
  return std::string(to_string(plan.variant)) + "/" + std::string(to_string(plan.reinit));
}

std::pair<ModelState, MaskSnapshot> capture(const TrainingRecord& run, std::string source) {
  if (run.config.method != Method::Magnitude && run.config.method != Method::Random) {
    throw ValidationError("capture: run used method '" +
                          std::string(to_string(run.config.method)) + "', which learns no masks");
  }
  MaskSnapshot snap;
  snap.source = std::move(source);
  for (std::size_t k : run.spec.weight_layer_indices()) {
    const auto& mask = run.final_state.layers[k].mask;
    if (mask.size() != run.spec.layers[k].weight_count()) {
      throw ValidationError("capture: layer '" + run.spec.layers[k].name + "' has no mask");
    }
    snap.layers.push_back(run.spec.layers[k].name);
    snap.masks.push_back(mask);
  }
  snap.sparsity = global_sparsity(layer_sparsity(run.spec, snap.masks));
  return {run.initial, std::move(snap)};
}

ModelState reinit_nnz_scaled(const ModelSpec& spec, const MaskSnapshot& masks, const Rng& rng) {
  ModelState state = init_model<float>(spec, InitOptions{Method::Magnitude}, rng);
  const auto idx = spec.weight_layer_indices();
  if (masks.masks.size() != idx.size()) throw ValidationError("reinit: one mask per weight layer required");
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const LayerSpec& l = spec.layers[idx[j]];
    const SparsityMask& m = masks.masks[j];
    if (m.size() != l.weight_count()) throw ValidationError("reinit: mask shape mismatch on '" + l.name + "'");
    const std::size_t nnz = m.count_kept();
    if (nnz == 0) throw ValidationError("reinit: layer '" + l.name + "' mask is all zero");
    // Uniform(-a, a) has variance a^2 / 3; scale the limit by sqrt of the
    // variance multiplier.
    const double limit =
        glorot_limit(l) * std::sqrt(static_cast<double>(m.size()) / static_cast<double>(nnz));
    Rng stream = rng.substream(idx[j]);
    state.layers[idx[j]].weight.fill(0.0f);
    stream.fill_uniform(state.layers[idx[j]].weight.data(), -limit, limit);
  }
  return state;
}

LrSchedule lr_for_scheme(const LrSchedule& base, LrScheme scheme, Step base_steps, Step decay_period) {
  LrSchedule out = base;
  switch (scheme) {
    case LrScheme::Standard:
    case LrScheme::ExtendedFinal:
      // Region boundaries stay put; past total_steps a linear schedule holds
      // its final rate, a piecewise one stays in its last region.
      if (out.kind == LrSchedule::Kind::Linear && out.total_steps == 0) out.total_steps = base_steps;
      break;
    case LrScheme::ScaledRegions:
      for (Step& b : out.boundaries) b *= 2;
      out.warmup_steps *= 2;
      out.total_steps = 2 * (out.total_steps > 0 ? out.total_steps : base_steps);
      break;
    case LrScheme::RepeatedDecay:
    case LrScheme::RepeatedDecayNoWarmup: {
      const Step period = decay_period > 0 ? decay_period : std::max<Step>(1, base_steps / 3);
      out.kind = LrSchedule::Kind::Piecewise;
      out.boundaries.clear();
      for (Step b = period; b < 2 * base_steps; b += period) out.boundaries.push_back(b);
      if (scheme == LrScheme::RepeatedDecayNoWarmup) out.warmup_steps = 0;
      break;
    }
  }
  out.validate();
  return out;
}

TrainingRecord run_variant(const ModelSpec& spec, const ExperimentPlan& plan,
                           const MaskSnapshot& masks, const ModelState* original_init,
                           const TrainConfig& base_config, const Dataset& train_data,
                           const Dataset* test_data, std::uint64_t seed) {
  plan.validate();
  TrainConfig config = base_config;
  if (config.method != Method::Magnitude && config.method != Method::Random) {
    config.method = Method::Magnitude;
  }
  const Step base_steps = base_config.total_steps(train_data.size());
  config.steps = plan.steps_for(base_steps);
  config.lr = lr_for_scheme(base_config.lr, plan.lr_scheme, base_steps, plan.decay_period);
  config.seed = seed;

  TrainStart start;
  start.fixed_masks = masks.masks;
  const Rng run(seed);
  switch (plan.reinit) {
    case Reinit::OriginalInit:
      if (original_init == nullptr) throw ValidationError("lottery variant needs the captured init");
      start.initial = *original_init;
      break;
    case Reinit::FreshStandard:
      start.initial = init_model<float>(spec, InitOptions{config.method}, run.substream(1));
      break;
    case Reinit::FreshNnzScaled:
      start.initial = reinit_nnz_scaled(spec, masks, run.substream(1));
      break;
  }

  const auto idx = spec.weight_layer_indices();
  TrainHooks hooks;
  hooks.after_step = [&](Step t, const ModelState& s) {
    if (t % plan.check_every != 0) return;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const auto& p = s.layers[idx[j]];
      if (!(p.mask == masks.masks[j])) throw std::logic_error("retraining mask changed");
      for (std::size_t i = 0; i < p.weight.size(); ++i) {
        if (!p.mask.kept(i) && p.weight[i] != 0.0f) {
          throw std::logic_error("masked weight became nonzero during retraining");
        }
      }
    }
  };

  try {
    return train(spec, config, train_data, test_data, start, hooks);
  } catch (const NumericalError& e) {
    TrainingRecord failed;
    failed.spec = spec;
    failed.config = config;
    failed.initial = *start.initial;
    failed.failed = true;
    failed.failure = e.what();
    failed.steps_run = config.steps;
    return failed;
  }
}

std::vector<ComparisonRow> compare(const std::vector<VariantRun>& runs,
                                   const std::vector<VariantRun>& baselines) {
  auto level_key = [](double s) { return static_cast<long>(std::lround(s * 1000.0)); };
  std::map<long, std::vector<double>> base_acc;
  for (const auto& b : baselines) {
    if (!b.record.failed) base_acc[level_key(b.sparsity_level)].push_back(b.record.test_accuracy);
  }
  std::map<std::pair<long, std::string>, ComparisonRow> rows;
  for (const auto& r : runs) {
    const long key = level_key(r.sparsity_level);
    auto& row = rows[{key, r.variant}];
    if (row.runs == 0) {
      row.variant = r.variant;
      row.sparsity_level = static_cast<double>(key) / 1000.0;
      row.min = std::numeric_limits<double>::infinity();
      row.max = -std::numeric_limits<double>::infinity();
    }
    ++row.runs;
    if (r.record.failed) {
      ++row.failed;
      continue;
    }
    const double a = r.record.test_accuracy;
    row.mean += a;
    row.min = std::min(row.min, a);
    row.max = std::max(row.max, a);
  }
  std::vector<ComparisonRow> out;
  for (auto& [key, row] : rows) {
    const auto it = base_acc.find(key.first);
    if (it == base_acc.end()) {
      throw ValidationError("compare: no baseline at sparsity " + std::to_string(row.sparsity_level));
    }
    const std::size_t ok = row.runs - row.failed;
    if (ok == 0) {
      row.mean = row.min = row.max = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.mean /= static_cast<double>(ok);
    }
    double b = 0;
    for (double v : it->second) b += v;
    row.baseline = b / static_cast<double>(it->second.size());
    row.gap = row.baseline - row.mean;
    out.push_back(row);
  }
  return out;
}

}  // namespace sparsekit
