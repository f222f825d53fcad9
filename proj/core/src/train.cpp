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

#include "sparsekit/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "sparsekit/ops.hpp"
#include "sparsekit/random_prune.hpp"

namespace sparsekit {

void LrSchedule::validate() const {
  if (!(base > 0) || !std::isfinite(base)) throw ValidationError("lr base must be finite and > 0");
  if (warmup_steps < 0) throw ValidationError("lr warmup_steps must be >= 0");
  if (!(decay > 0 && decay <= 1)) throw ValidationError("lr decay must lie in (0, 1]");
  if (!std::is_sorted(boundaries.begin(), boundaries.end())) {
    throw ValidationError("lr boundaries must be ascending");
  }
  if (kind == Kind::Linear && !(final_fraction >= 0 && final_fraction <= 1)) {
    throw ValidationError("lr final_fraction must lie in [0, 1]");
  }
}

double LrSchedule::at(Step t) const {
  double lr = base;
  if (kind == Kind::Piecewise) {
    const auto k = std::upper_bound(boundaries.begin(), boundaries.end(), t) - boundaries.begin();
    lr *= std::pow(decay, static_cast<double>(k));
  } else if (total_steps > 0) {
    const double p = std::min(1.0, static_cast<double>(t) / static_cast<double>(total_steps));
    lr *= 1.0 - (1.0 - final_fraction) * p;
  }
  if (t < warmup_steps) lr *= static_cast<double>(t + 1) / static_cast<double>(warmup_steps);
  return lr;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ValidationError("train batch_size must be > 0");
  if (steps < 0) throw ValidationError("train steps must be >= 0");
  if (steps == 0 && epochs == 0) throw ValidationError("train needs epochs > 0 or steps > 0");
  if (log_every <= 0) throw ValidationError("train log_every must be > 0");
  lr.validate();
  if (method == Method::Magnitude || method == Method::Random) prune.validate();
  if (method == Method::VariationalDropout || method == Method::L0) reg_ramp.validate();
  if (method == Method::L0) {
    hc.validate();
    if (!(l0_initial_dropout > 0 && l0_initial_dropout < 1)) {
      throw ValidationError("l0 initial_dropout must lie in (0, 1)");
    }
    if (l0_weight_decay < 0) throw ValidationError("l0 weight_decay must be >= 0");
  }
  if (!(vd_log_alpha_clip > 0)) throw ValidationError("vd log_alpha_clip must be > 0");
}

Step TrainConfig::total_steps(std::size_t train_size) const {
  if (steps > 0) return steps;
  const std::size_t per_epoch = (train_size + batch_size - 1) / batch_size;
  return static_cast<Step>(per_epoch * epochs);
}

TestTimeOptions test_time_options(const TrainConfig& config) {
  return TestTimeOptions{config.method, config.vd_threshold, config.hc};
}

std::vector<LayerSparsity> layer_sparsity(const ModelSpec& spec,
                                          const std::vector<SparsityMask>& masks) {
  const auto sizes = spec.weight_layers();
  if (masks.size() != sizes.size()) throw ValidationError("one mask per weight layer required");
  std::vector<LayerSparsity> out;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    if (masks[j].size() != sizes[j].size) {
      throw ValidationError("mask for layer '" + sizes[j].name + "' has the wrong length");
    }
    LayerSparsity l{sizes[j].name, sizes[j].size, masks[j].count_kept(), 0.0};
    l.sparsity = 1.0 - static_cast<double>(l.nonzeros) / static_cast<double>(l.size);
    out.push_back(l);
  }
  return out;
}

double global_sparsity(const std::vector<LayerSparsity>& layers) {
  std::size_t total = 0, nonzeros = 0;
  for (const auto& l : layers) {
    total += l.size;
    nonzeros += l.nonzeros;
  }
  return total == 0 ? 0.0 : 1.0 - static_cast<double>(nonzeros) / static_cast<double>(total);
}

double train_time_sparsity(const ModelSpec& spec, const ModelState& state, const TrainConfig& config) {
  if (config.method != Method::L0) {
    return global_sparsity(layer_sparsity(spec, test_time_masks(spec, state, test_time_options(config))));
  }
  double expected = 0;
  std::size_t total = 0;
  for (std::size_t k : spec.weight_layer_indices()) {
    expected += hc_expected_l0(HardConcreteParams{state.layers[k].log_alpha, config.hc});
    total += state.layers[k].log_alpha.size();
  }
  return std::clamp(1.0 - expected / static_cast<double>(total), 0.0, 1.0);
}

double evaluate(const ModelSpec& spec, const ModelState& dense_state, const Dataset& data,
                std::size_t batch, std::size_t threads) {
  if (batch == 0) throw ValidationError("evaluate batch must be > 0");
  const std::size_t n = data.size();
  const std::size_t batches = (n + batch - 1) / batch;
  threads = std::clamp<std::size_t>(threads, 1, batches);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> correct(threads, 0);
  auto work = [&](std::size_t w) {
    for (std::size_t b = w; b < batches; b += threads) {
      const std::size_t first = b * batch, count = std::min(batch, n - first);
      Tape<float> tape;
      Var<float> x = tape.constant(data.gather_images(order, first, count));
      const auto labels = data.gather_labels(order, first, count);
      correct[w] += ops::count_correct(dense_forward(tape, spec, dense_state, x).value(), labels);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w);
  }
  const std::size_t hits = std::accumulate(correct.begin(), correct.end(), std::size_t{0});
  return static_cast<double>(hits) / static_cast<double>(n);
}

TestResult test_time_result(const ModelSpec& spec, const ModelState& state,
                            const TestTimeOptions& options, const Dataset& test_data,
                            std::size_t batch, std::size_t threads) {
  TestResult r;
  r.layers = layer_sparsity(spec, test_time_masks(spec, state, options));
  r.sparsity = global_sparsity(r.layers);
  r.accuracy = evaluate(spec, effective_state(spec, state, options), test_data, batch, threads);
  return r;
}

namespace {

void strip_grads(ModelState& s) {
  for (auto* p : s.parameters()) p->drop_grad();
}

void zero_masked(ModelState& s, const ModelSpec& spec) {
  for (std::size_t k : spec.weight_layer_indices()) {
    s.layers[k].mask.apply(s.layers[k].weight.data());
  }
}

SparsitySample sample_sparsity(Step t, const ModelSpec& spec, const ModelState& state,
                               const TrainConfig& config) {
  SparsitySample s{t, 0.0, {}};
  if (config.method == Method::L0) {
    s.global = train_time_sparsity(spec, state, config);
    for (std::size_t k : spec.weight_layer_indices()) {
      const auto& la = state.layers[k].log_alpha;
      s.layers.push_back(1.0 - hc_expected_l0(HardConcreteParams{la, config.hc}) /
                                   static_cast<double>(la.size()));
    }
    return s;
  }
  const auto layers = layer_sparsity(spec, test_time_masks(spec, state, test_time_options(config)));
  s.global = global_sparsity(layers);
  for (const auto& l : layers) s.layers.push_back(l.sparsity);
  return s;
}

}  // namespace

TrainingRecord train(const ModelSpec& spec, const TrainConfig& config, const Dataset& train_data,
                     const Dataset* test_data, const TrainStart& start, const TrainHooks& hooks) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  spec.validate();
  train_data.validate();
  if (train_data.sample_dims() != spec.input_dims) {
    throw ValidationError("dataset samples " + shape_string(train_data.sample_dims()) +
                          " do not match model input " + shape_string(spec.input_dims));
  }
  const bool fixed = !start.fixed_masks.empty();
  const bool pruning = config.method == Method::Magnitude || config.method == Method::Random;
  const bool regularized = config.method == Method::VariationalDropout || config.method == Method::L0;
  if (fixed && !pruning) throw ValidationError("fixed masks need the magnitude or random method");

  const Rng run(config.seed);
  ModelState state = start.initial
                         ? *start.initial
                         : init_model<float>(spec,
                                             InitOptions{config.method, config.vd_log_sigma2_init,
                                                         config.l0_initial_dropout},
                                             run.substream(1));
  if (state.layers.size() != spec.layers.size()) throw ValidationError("initial state does not match model");
  const auto weight_idx = spec.weight_layer_indices();
  if (fixed) {
    if (start.fixed_masks.size() != weight_idx.size()) {
      throw ValidationError("fixed masks: one mask per weight layer required");
    }
    for (std::size_t j = 0; j < weight_idx.size(); ++j) {
      auto& p = state.layers[weight_idx[j]];
      if (start.fixed_masks[j].size() != p.weight.size()) {
        throw ValidationError("fixed mask shape does not match layer '" +
                              spec.layers[weight_idx[j]].name + "'");
      }
      p.mask = start.fixed_masks[j];
    }
    zero_masked(state, spec);
  }
  strip_grads(state);

  TrainingRecord rec;
  rec.spec = spec;
  rec.config = config;
  rec.initial = state;

  Rng shuffle_rng = run.substream(2);
  Rng noise_rng = run.substream(3);
  Rng prune_rng = run.substream(4);
  BasicOptimizer<float> opt(config.optimizer);
  const auto params = state.parameters();
  const auto sizes = spec.weight_layers();

  const std::size_t n = train_data.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Step total = config.total_steps(n);
  // A linear schedule without an explicit horizon decays over the run.
  LrSchedule lr = config.lr;
  if (lr.kind == LrSchedule::Kind::Linear && lr.total_steps == 0) lr.total_steps = total;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t pos = n;

  ForwardOptions fwd;
  fwd.method = config.method;
  fwd.mode = GateMode::Train;
  fwd.grad_mode = (config.method == Method::Random || fixed) ? GradMode::Masked : config.grad_mode;
  fwd.hc = config.hc;
  const double decay_coef = config.method == Method::L0
                                ? config.l0_weight_decay * l0_weight_decay_scale(config.l0_initial_dropout)
                                : 0.0;

  for (Step t = 0; t < total; ++t) {
    if (pruning && !fixed && is_pruning_event(config.prune, t)) {
      const double s_t = sparsity_at(config.prune, t);
      const double s_f = config.prune.final_sparsity;
      const LayerPolicy policy = s_f > 0 ? config.policy.scaled(s_t / s_f) : config.policy;
      const auto targets = allocate_layer_targets(sizes, s_t, policy);
      for (std::size_t j = 0; j < weight_idx.size(); ++j) {
        auto& p = state.layers[weight_idx[j]];
        if (config.method == Method::Magnitude) {
          magnitude_select(std::span<const float>(p.weight.data()), p.mask, targets[j].zeros);
        } else {
          random_grow_mask(p.mask, std::max(targets[j].zeros, p.mask.count_masked()), prune_rng);
        }
      }
      rec.sparsity_log.push_back(sample_sparsity(t, spec, state, config));
    }

    if (pos >= n) {
      shuffle_rng.shuffle(order);
      pos = 0;
    }
    const std::size_t count = std::min(config.batch_size, n - pos);
    StepLog entry;
    entry.step = t;
    entry.lr = lr.at(t);
    try {
      Tape<float> tape;
      Var<float> x = tape.constant(train_data.gather_images(order, pos, count));
      const auto labels = train_data.gather_labels(order, pos, count);
      Var<float> logits = model_forward(tape, spec, state, x, fwd, noise_rng);
      Var<float> task = ops::softmax_cross_entropy(logits, std::span<const std::int32_t>(labels));
      Var<float> loss = task;
      if (regularized) {
        entry.coefficient = ramp_at(config.reg_ramp, t) * inv_n;
        Var<float> reg = model_regularizer(tape, spec, state, config.method, config.hc,
                                           config.vd_log_alpha_clip);
        entry.regularizer = reg.value()[0];
        loss = ops::add(loss, ops::scale(reg, entry.coefficient));
      }
      if (decay_coef > 0) {
        Var<float> decay = model_l0_weight_decay(tape, spec, state, config.hc);
        entry.decay = decay.value()[0];
        entry.decay_coefficient = decay_coef;
        loss = ops::add(loss, ops::scale(decay, decay_coef));
      }
      entry.task_loss = task.value()[0];
      entry.loss = loss.value()[0];
      if (t % config.log_every == 0 || t + 1 == total) {
        entry.batch_accuracy =
            static_cast<double>(ops::count_correct(logits.value(), labels)) / static_cast<double>(count);
      }
      tape.backward(loss);
      opt.step(params, entry.lr);
      for (auto* p : params) {
        if (!p->all_finite()) throw NumericalError("non-finite parameter after update");
      }
    } catch (const NumericalError& e) {
      throw NumericalError("training diverged at step " + std::to_string(t) + " (method " +
                           std::string(to_string(config.method)) + ", lr " + std::to_string(entry.lr) +
                           "): " + e.what());
    }
    if (fixed) zero_masked(state, spec);
    pos += count;

    if (t % config.log_every == 0 || t + 1 == total) {
      rec.log.push_back(entry);
      if (hooks.on_log) hooks.on_log(entry);
    }
    if (hooks.after_step) hooks.after_step(t, state);
  }

  rec.steps_run = total;
  rec.final_state = state;
  strip_grads(rec.final_state);
  rec.sparsity_log.push_back(sample_sparsity(total, spec, rec.final_state, config));
  rec.train_sparsity = train_time_sparsity(spec, rec.final_state, config);
  const TestTimeOptions tto = test_time_options(config);
  rec.layers = layer_sparsity(spec, test_time_masks(spec, rec.final_state, tto));
  rec.test_sparsity = global_sparsity(rec.layers);
  if (test_data != nullptr) {
    rec.test_accuracy = evaluate(spec, effective_state(spec, rec.final_state, tto), *test_data,
                                 config.eval_batch, config.eval_threads);
  }
  rec.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace sparsekit
