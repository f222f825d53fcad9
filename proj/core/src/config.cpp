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

#include "sparsekit/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sparsekit {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto p = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"model.name", "lenet300", "lenet300 | lenet5"},
      {"data.source", "mnist", "mnist | synthetic"},
      {"data.dir", "", "MNIST IDX directory; empty uses $SPARSEKIT_DATA"},
      {"data.train_limit", "0", "use only the first N training samples (0 = all)"},
      {"data.test_limit", "0", "use only the first N test samples (0 = all)"},
      {"data.synthetic_n", "2000", "synthetic training samples"},
      {"data.synthetic_classes", "10", "synthetic class count"},

      {"train.method", "none", "none | magnitude | random | vd | l0"},
      {"train.seed", "1", "run seed (init, shuffling, noise, random pruning)"},
      {"train.batch_size", "100", "minibatch size"},
      {"train.epochs", "20", "epochs when train.steps is 0"},
      {"train.steps", "0", "total optimizer steps; overrides epochs when > 0"},
      {"train.optimizer", "adam", "adam | sgd (momentum)"},
      {"train.lr", "0.001", "base learning rate"},
      {"train.momentum", "0.9", "sgd momentum"},
      {"train.lr_schedule", "piecewise", "piecewise | linear"},
      {"train.lr_warmup_steps", "0", "linear warmup length"},
      {"train.lr_boundaries", "", "piecewise region starts, ':'-separated steps"},
      {"train.lr_decay", "0.1", "piecewise multiplier per boundary"},
      {"train.lr_final_fraction", "0", "linear: final lr as a fraction of base"},
      {"train.lr_total_steps", "0", "linear: decay horizon (0 = run length)"},
      {"train.grad_mode", "dense", "magnitude pruning gradient: dense (straight-through) | masked"},
      {"train.log_every", "100", "steps between log entries"},
      {"train.eval_batch", "1000", "evaluation batch size"},
      {"train.eval_threads", "1", "evaluation worker threads"},

      {"prune.start_step", "0", "first pruning event"},
      {"prune.end_step", "1000", "step at which final sparsity is reached"},
      {"prune.frequency", "100", "steps between pruning events"},
      {"prune.initial_sparsity", "0", "sparsity at start_step"},
      {"prune.final_sparsity", "0.9", "global target sparsity"},
      {"prune.policy", "", "per-layer overrides, e.g. fc1=dense:fc3=0.8"},

      {"reg.shape", "linear", "regularizer ramp: constant | linear | cubic"},
      {"reg.start_step", "0", "ramp start"},
      {"reg.end_step", "0", "ramp end (step at which the final coefficient applies)"},
      {"reg.coefficient", "1", "final regularizer weight; the loss uses coefficient / N"},

      {"vd.log_sigma2_init", "-10", "initial log sigma^2"},
      {"vd.threshold", "3", "log alpha pruning threshold"},
      {"vd.thresholds", "3:2:1:0.5:0.1", "thresholds evaluated by the trade-off sweep"},
      {"vd.log_alpha_clip", "8", "training clip on |log alpha| inside the KL term"},

      {"l0.beta", "0.6666666666666666", "hard-concrete temperature"},
      {"l0.gamma", "-0.1", "stretch lower end"},
      {"l0.zeta", "1.1", "stretch upper end"},
      {"l0.initial_dropout", "0.1", "initial gate dropout rate"},
      {"l0.weight_decay", "0", "expected squared-norm penalty weight on gated layers"},

      {"harness.variant", "scratch-e", "lottery | scratch-e | scratch-b"},
      {"harness.reinit", "fresh-standard", "original-init | fresh-standard | fresh-nnz-scaled"},
      {"harness.lr_scheme", "standard",
       "standard | scaled-regions | extended-final | repeated-decay | repeated-decay-no-warmup"},
      {"harness.base_checkpoint", "", "checkpoint holding the learned masks and initial weights"},
      {"harness.replicas_outer", "1", "independent masks"},
      {"harness.replicas_inner", "1", "retraining replicas per mask"},
      {"harness.seeds", "", "':'-separated replica seeds (default: train.seed + i)"},
      {"harness.decay_period", "0", "repeated-decay period in steps (0 = base steps / 3)"},
      {"harness.check_every", "100", "mask immutability check period"},

      {"sweep.workers", "1", "concurrent runs in a sweep"},
  };
  return keys;
}

Config::Config() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

Config Config::parse(std::string_view text, std::string_view origin) {
  Config c;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ValidationError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key = value");
      }
      try {
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
      } catch (const ValidationError& e) {
        throw ValidationError(std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void Config::set(std::string_view key, std::string_view value) {
  const auto it = values_.find(std::string(key));
  if (it == values_.end()) throw ValidationError("unknown config key '" + std::string(key) + "'");
  it->second = std::string(trim(value));
}

void Config::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ValidationError("expected key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

const std::string& Config::get(std::string_view key) const {
  const auto it = values_.find(std::string(key));
  if (it == values_.end()) throw ValidationError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

bool Config::is_default(std::string_view key) const {
  for (const auto& k : config_keys()) {
    if (k.name == key) return get(key) == k.default_value;
  }
  throw ValidationError("unknown config key '" + std::string(key) + "'");
}

double Config::get_double(std::string_view key) const {
  const std::string& v = get(key);
  double out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ValidationError("config key '" + std::string(key) + "' needs a number, got '" + v + "'");
  }
  return out;
}

std::int64_t Config::get_int(std::string_view key) const {
  const std::string& v = get(key);
  std::int64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ValidationError("config key '" + std::string(key) + "' needs an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t Config::get_uint(std::string_view key) const {
  const std::int64_t v = get_int(key);
  if (v < 0) throw ValidationError("config key '" + std::string(key) + "' must be >= 0");
  return static_cast<std::uint64_t>(v);
}

std::vector<std::string> Config::get_list(std::string_view key) const {
  const std::string& v = get(key);
  if (v.empty()) return {};
  return split(v, ':');
}

bool Config::is_sweep() const {
  for (const auto& [k, v] : values_) {
    if (v.find(',') != std::string::npos) return true;
  }
  return false;
}

std::vector<Config> Config::expand() const {
  std::vector<Config> out{*this};
  for (const auto& [k, v] : values_) {
    if (v.find(',') == std::string::npos) continue;
    const auto options = split(v, ',');
    std::vector<Config> next;
    for (const Config& base : out) {
      for (const auto& o : options) {
        if (o.empty()) throw ValidationError("config key '" + k + "': empty sweep value");
        Config c = base;
        c.values_[k] = o;
        next.push_back(std::move(c));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::uint64_t Config::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::string_view s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : values_) {
    // Seeds key the row separately; the rest never change a run's result.
    if (k == "train.seed" || k == "harness.seeds" || k == "data.dir" || k == "train.eval_threads" ||
        k == "sweep.workers") {
      continue;
    }
    feed(k);
    feed("=");
    feed(v);
    feed("\n");
  }
  return h;
}

std::string Config::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

std::string Config::to_text() const {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + get(k.name) + "\n";
  return out;
}

ModelSpec model_from_config(const Config& c) { return build_model(c.get("model.name")); }

TrainConfig train_config_from(const Config& c) {
  if (c.is_sweep()) throw ValidationError("config still holds sweep lists; expand it first");
  TrainConfig t;
  t.method = parse_method(c.get("train.method"));
  t.seed = c.get_uint("train.seed");
  t.batch_size = c.get_uint("train.batch_size");
  t.epochs = c.get_uint("train.epochs");
  t.steps = c.get_int("train.steps");
  const std::string& opt = c.get("train.optimizer");
  if (opt == "adam") {
    t.optimizer.kind = OptimizerKind::Adam;
  } else if (opt == "sgd") {
    t.optimizer.kind = OptimizerKind::SgdMomentum;
  } else {
    throw ValidationError("train.optimizer must be adam or sgd");
  }
  t.optimizer.learning_rate = c.get_double("train.lr");
  t.optimizer.momentum = c.get_double("train.momentum");
  t.lr.base = t.optimizer.learning_rate;
  const std::string& sched = c.get("train.lr_schedule");
  if (sched == "piecewise") {
    t.lr.kind = LrSchedule::Kind::Piecewise;
  } else if (sched == "linear") {
    t.lr.kind = LrSchedule::Kind::Linear;
  } else {
    throw ValidationError("train.lr_schedule must be piecewise or linear");
  }
  t.lr.warmup_steps = c.get_int("train.lr_warmup_steps");
  for (const auto& b : c.get_list("train.lr_boundaries")) {
    Config tmp;
    tmp.set("train.steps", b);
    t.lr.boundaries.push_back(tmp.get_int("train.steps"));
  }
  t.lr.decay = c.get_double("train.lr_decay");
  t.lr.final_fraction = c.get_double("train.lr_final_fraction");
  t.lr.total_steps = c.get_int("train.lr_total_steps");
  t.grad_mode = parse_grad_mode(c.get("train.grad_mode"));
  t.log_every = c.get_int("train.log_every");
  t.eval_batch = c.get_uint("train.eval_batch");
  t.eval_threads = c.get_uint("train.eval_threads");

  t.prune.start_step = c.get_int("prune.start_step");
  t.prune.end_step = c.get_int("prune.end_step");
  t.prune.frequency = c.get_int("prune.frequency");
  t.prune.initial_sparsity = c.get_double("prune.initial_sparsity");
  t.prune.final_sparsity = c.get_double("prune.final_sparsity");
  t.policy = LayerPolicy::parse(c.get("prune.policy"));

  t.reg_ramp.shape = parse_ramp_shape(c.get("reg.shape"));
  t.reg_ramp.start_step = c.get_int("reg.start_step");
  t.reg_ramp.end_step = c.get_int("reg.end_step");
  t.reg_ramp.final_value = c.get_double("reg.coefficient");

  t.vd_log_sigma2_init = c.get_double("vd.log_sigma2_init");
  t.vd_threshold = c.get_double("vd.threshold");
  t.vd_log_alpha_clip = c.get_double("vd.log_alpha_clip");

  t.hc.beta = c.get_double("l0.beta");
  t.hc.gamma = c.get_double("l0.gamma");
  t.hc.zeta = c.get_double("l0.zeta");
  t.l0_initial_dropout = c.get_double("l0.initial_dropout");
  t.l0_weight_decay = c.get_double("l0.weight_decay");
  t.validate();
  return t;
}

ExperimentPlan plan_from_config(const Config& c) {
  ExperimentPlan p;
  p.base_checkpoint = c.get("harness.base_checkpoint");
  p.variant = parse_variant(c.get("harness.variant"));
  p.reinit = parse_reinit(c.get("harness.reinit"));
  p.lr_scheme = parse_lr_scheme(c.get("harness.lr_scheme"));
  p.replicas_outer = c.get_uint("harness.replicas_outer");
  p.replicas_inner = c.get_uint("harness.replicas_inner");
  p.decay_period = c.get_int("harness.decay_period");
  p.check_every = c.get_int("harness.check_every");
  const auto seeds = c.get_list("harness.seeds");
  if (seeds.empty()) {
    const std::uint64_t base = c.get_uint("train.seed");
    for (std::size_t i = 0; i < p.replicas_inner; ++i) p.seeds.push_back(base + i);
  } else {
    for (const auto& s : seeds) {
      Config tmp;
      tmp.set("train.seed", s);
      p.seeds.push_back(tmp.get_uint("train.seed"));
    }
  }
  p.validate();
  return p;
}

}  // namespace sparsekit
