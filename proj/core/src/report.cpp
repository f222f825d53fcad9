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

#include "sparsekit/report.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace sparsekit {
namespace {

std::string fmt(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.10g", v);
  return b;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

template <class N>
N parse_num(const std::string& s, const char* field) {
  N v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ValidationError(std::string("sweep CSV: bad ") + field + " '" + s + "'");
  }
  return v;
}

}  // namespace

std::uint64_t count_flops(const ModelSpec& spec, const std::vector<SparsityMask>& masks) {
  const auto uses = spec.weight_uses();
  const auto sizes = spec.weight_layers();
  if (masks.size() != uses.size()) throw ValidationError("count_flops: one mask per weight layer required");
  std::uint64_t total = 0;
  for (std::size_t j = 0; j < masks.size(); ++j) {
    if (masks[j].size() != sizes[j].size) throw ValidationError("count_flops: mask size mismatch");
    total += 2 * static_cast<std::uint64_t>(masks[j].count_kept()) * uses[j];
  }
  return total;
}

double count_flops(const ModelSpec& spec, const std::vector<double>& effective_nonzeros) {
  const auto uses = spec.weight_uses();
  if (effective_nonzeros.size() != uses.size()) {
    throw ValidationError("count_flops: one count per weight layer required");
  }
  double total = 0;
  for (std::size_t j = 0; j < uses.size(); ++j) {
    total += 2.0 * effective_nonzeros[j] * static_cast<double>(uses[j]);
  }
  return total;
}

std::uint64_t count_dense_flops(const ModelSpec& spec) {
  std::vector<SparsityMask> dense;
  for (const auto& l : spec.weight_layers()) dense.emplace_back(l.size, true);
  return count_flops(spec, dense);
}

double l0_expected_flops(const ModelSpec& spec, const ModelState& state, const HardConcreteShape& hc) {
  std::vector<double> nz;
  for (std::size_t k : spec.weight_layer_indices()) {
    if (state.layers[k].log_alpha.empty()) throw ValidationError("l0_expected_flops: layer has no gates");
    nz.push_back(hc_expected_l0(HardConcreteParams{state.layers[k].log_alpha, hc}));
  }
  return count_flops(spec, nz);
}

const std::string& SweepRow::csv_header() {
  static const std::string h =
      "method,sparsity_target,train_sparsity,test_sparsity,test_accuracy,reg_coefficient,threshold,"
      "seed,steps,wall_clock,config_hash";
  return h;
}

std::string SweepRow::to_csv() const {
  return method + "," + fmt(sparsity_target) + "," + fmt(train_sparsity) + "," + fmt(test_sparsity) + "," +
         fmt(test_accuracy) + "," + fmt(reg_coefficient) + "," + fmt(threshold) + "," + std::to_string(seed) +
         "," + std::to_string(steps) + "," + fmt(wall_clock) + "," + config_hash;
}

SweepRow SweepRow::from_csv(const std::string& line) {
  const auto f = split_csv(line);
  if (f.size() != 11) throw ValidationError("sweep CSV: expected 11 fields, got " + std::to_string(f.size()));
  SweepRow r;
  r.method = f[0];
  r.sparsity_target = parse_num<double>(f[1], "sparsity_target");
  r.train_sparsity = parse_num<double>(f[2], "train_sparsity");
  r.test_sparsity = parse_num<double>(f[3], "test_sparsity");
  r.test_accuracy = parse_num<double>(f[4], "test_accuracy");
  r.reg_coefficient = parse_num<double>(f[5], "reg_coefficient");
  r.threshold = parse_num<double>(f[6], "threshold");
  r.seed = parse_num<std::uint64_t>(f[7], "seed");
  r.steps = parse_num<std::int64_t>(f[8], "steps");
  r.wall_clock = parse_num<double>(f[9], "wall_clock");
  r.config_hash = f[10];
  return r;
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read sweep CSV " + path.string());
  std::vector<SweepRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      if (line != SweepRow::csv_header()) throw ValidationError("sweep CSV: unexpected header in " + path.string());
      header = false;
      continue;
    }
    rows.push_back(SweepRow::from_csv(line));
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = SweepRow::csv_header() + "\n";
  for (const auto& r : rows) out += r.to_csv() + "\n";
  return out;
}

SweepWriter::SweepWriter(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_) && std::filesystem::file_size(path_) > 0) {
    for (const auto& r : read_sweep_csv(path_)) keys_.insert({r.config_hash, r.seed});
    return;
  }
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create " + path_.string());
  out << SweepRow::csv_header() << "\n";
}

bool SweepWriter::append(const SweepRow& row) {
  std::lock_guard lock(mu_);
  if (!keys_.insert({row.config_hash, row.seed}).second) return false;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path_.string());
  out << row.to_csv() << "\n";
  return true;
}

bool SweepWriter::contains(const std::string& config_hash, std::uint64_t seed) const {
  std::lock_guard lock(mu_);
  return keys_.count({config_hash, seed}) != 0;
}

std::vector<SweepRow> pareto_frontier(const std::vector<SweepRow>& rows) {
  if (rows.empty()) return {};
  for (const auto& r : rows) {
    if (r.method != rows.front().method) throw ValidationError("pareto_frontier: rows mix methods");
  }
  std::vector<const SweepRow*> order;
  for (const auto& r : rows) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const SweepRow* a, const SweepRow* b) {
    if (a->test_sparsity != b->test_sparsity) return a->test_sparsity > b->test_sparsity;
    return a->test_accuracy > b->test_accuracy;
  });
  // Sweep from the sparsest group down. Within a group only its best
  // accuracy can survive, and only if no sparser row reaches it.
  std::vector<SweepRow> out;
  double best_sparser = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    const double s = order[i]->test_sparsity;
    const double top = order[i]->test_accuracy;
    while (j < order.size() && order[j]->test_sparsity == s) {
      if (order[j]->test_accuracy == top && top > best_sparser) out.push_back(*order[j]);
      ++j;
    }
    best_sparser = std::max(best_sparser, top);
    i = j;
  }
  std::sort(out.begin(), out.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.test_sparsity != b.test_sparsity) return a.test_sparsity < b.test_sparsity;
    return a.test_accuracy < b.test_accuracy;
  });
  return out;
}

std::string frontier_series_csv(const std::vector<SweepRow>& frontier) {
  std::string out = "x,y\n";
  for (const auto& r : frontier) out += fmt(r.test_sparsity) + "," + fmt(r.test_accuracy) + "\n";
  return out;
}

DistributionReport sparsity_distribution_report(const ModelSpec& spec,
                                                const std::vector<SparsityMask>& masks) {
  const auto layers = layer_sparsity(spec, masks);
  const auto uses = spec.weight_uses();
  DistributionReport rep;
  rep.global.name = "global";
  for (std::size_t j = 0; j < layers.size(); ++j) {
    DistributionRow row{layers[j].name, layers[j].size, layers[j].nonzeros, layers[j].sparsity,
                        2 * static_cast<std::uint64_t>(layers[j].nonzeros) * uses[j]};
    rep.global.size += row.size;
    rep.global.nonzeros += row.nonzeros;
    rep.global.flops += row.flops;
    rep.layers.push_back(row);
  }
  rep.global.sparsity = global_sparsity(layers);
  return rep;
}

std::string distribution_csv(const DistributionReport& report) {
  std::string out = std::string("# ") + kFlopConvention + "\n";
  out += "layer,size,nonzeros,sparsity,flops\n";
  auto line = [&](const DistributionRow& r) {
    out += r.name + "," + std::to_string(r.size) + "," + std::to_string(r.nonzeros) + "," + fmt(r.sparsity) +
           "," + std::to_string(r.flops) + "\n";
  };
  for (const auto& r : report.layers) line(r);
  line(report.global);
  return out;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "variant,sparsity,runs,failed,mean_accuracy,min_accuracy,max_accuracy,baseline_accuracy,gap\n";
  for (const auto& r : rows) {
    out += r.variant + "," + fmt(r.sparsity_level) + "," + std::to_string(r.runs) + "," +
           std::to_string(r.failed) + "," + fmt(r.mean) + "," + fmt(r.min) + "," + fmt(r.max) + "," +
           fmt(r.baseline) + "," + fmt(r.gap) + "\n";
  }
  return out;
}

}  // namespace sparsekit
