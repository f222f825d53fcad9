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

#include <doctest.h>

#include <cmath>

#include "sparsekit/harness.hpp"

using namespace sparsekit;

namespace {

struct BaseRun {
  ModelSpec spec = build_lenet300();
  Dataset data = synthetic_classification(200, 10, 5);
  TrainConfig config;
  TrainingRecord record;

  BaseRun() {
    config.method = Method::Magnitude;
    config.steps = 30;
    config.batch_size = 50;
    config.seed = 21;
    config.prune = {0, 20, 5, 0.0, 0.8};
    record = train(spec, config, data, &data);
  }
};

const BaseRun& base() {
  static const BaseRun b;
  return b;
}

ExperimentPlan plan(Variant v, Reinit r) {
  ExperimentPlan p;
  p.variant = v;
  p.reinit = r;
  p.check_every = 1;
  return p;
}

}  // namespace

TEST_CASE("plan validation and names") {
  CHECK_THROWS_AS(plan(Variant::Lottery, Reinit::FreshStandard).validate(), ValidationError);
  CHECK_THROWS_AS(plan(Variant::ScratchE, Reinit::OriginalInit).validate(), ValidationError);
  CHECK_NOTHROW(plan(Variant::ScratchB, Reinit::FreshNnzScaled).validate());
  CHECK(plan(Variant::ScratchB, Reinit::FreshStandard).steps_for(300) == 600);
  CHECK(plan(Variant::ScratchE, Reinit::FreshStandard).steps_for(300) == 300);
  for (auto s : {"lottery", "scratch-e", "scratch-b"}) CHECK(to_string(parse_variant(s)) == s);
  for (auto s : {"original-init", "fresh-standard", "fresh-nnz-scaled"}) CHECK(to_string(parse_reinit(s)) == s);
  for (auto s : {"standard", "scaled-regions", "extended-final", "repeated-decay", "repeated-decay-no-warmup"})
    CHECK(to_string(parse_lr_scheme(s)) == s);
  CHECK_THROWS_AS(parse_variant("scratch-c"), ValidationError);
  CHECK(variant_label(plan(Variant::ScratchB, Reinit::FreshNnzScaled)) == "scratch-b/fresh-nnz-scaled");
}

TEST_CASE("capture stores init and final masks") {
  const auto& b = base();
  const auto [init, snap] = capture(b.record, "mem");
  const auto [init2, snap2] = capture(b.record, "mem");
  CHECK(snap.masks == snap2.masks);
  CHECK(snap.sparsity == doctest::Approx(b.record.train_sparsity).epsilon(1e-12));
  CHECK(snap.sparsity == doctest::Approx(0.8).epsilon(1e-4));
  CHECK(snap.layers == std::vector<std::string>{"fc1", "fc2", "fc3"});
  for (std::size_t k : b.spec.weight_layer_indices()) {
    CHECK(init.layers[k].weight.identical(b.record.initial.layers[k].weight));
  }
  // The captured init is the seeded init of the base run.
  const auto seeded = init_model<float>(b.spec, InitOptions{Method::Magnitude}, Rng(b.config.seed).substream(1));
  for (std::size_t k : b.spec.weight_layer_indices()) CHECK(init.layers[k].weight.identical(seeded.layers[k].weight));

  TrainConfig dense = b.config;
  dense.method = Method::None;
  TrainingRecord r;
  r.config = dense;
  CHECK_THROWS_AS(capture(r), ValidationError);
}

TEST_CASE("lottery starts from init times mask") {
  const auto& b = base();
  const auto [init, snap] = capture(b.record);
  const auto rec = run_variant(b.spec, plan(Variant::Lottery, Reinit::OriginalInit), snap, &init, b.config, b.data,
                               nullptr, b.config.seed);
  REQUIRE_FALSE(rec.failed);
  const auto idx = b.spec.weight_layer_indices();
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto& w0 = init.layers[idx[j]].weight;
    const auto& got = rec.initial.layers[idx[j]].weight;
    for (std::size_t i = 0; i < w0.size(); ++i) {
      CHECK(got[i] == (snap.masks[j].kept(i) ? w0[i] : 0.0f));
    }
  }
  CHECK(rec.steps_run == 30);
  CHECK_THROWS_AS(run_variant(b.spec, plan(Variant::Lottery, Reinit::OriginalInit), snap, nullptr, b.config,
                              b.data, nullptr, 1),
                  ValidationError);
}

TEST_CASE("retraining keeps masks frozen and masked weights at zero") {
  const auto& b = base();
  const auto [init, snap] = capture(b.record);
  std::vector<TrainingRecord> recs;
  for (auto [v, r] : {std::pair{Variant::ScratchE, Reinit::FreshStandard},
                      std::pair{Variant::ScratchB, Reinit::FreshNnzScaled}}) {
    // check_every = 1: the hook asserts the freeze contract after every step.
    recs.push_back(run_variant(b.spec, plan(v, r), snap, nullptr, b.config, b.data, &b.data, 99));
    const auto& rec = recs.back();
    REQUIRE_FALSE(rec.failed);
    const auto idx = b.spec.weight_layer_indices();
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const auto& p = rec.final_state.layers[idx[j]];
      CHECK(p.mask == snap.masks[j]);
      for (std::size_t i = 0; i < p.weight.size(); ++i) {
        if (!p.mask.kept(i)) REQUIRE(p.weight[i] == 0.0f);
      }
    }
    CHECK(rec.train_sparsity == doctest::Approx(snap.sparsity).epsilon(1e-12));
  }
  CHECK(recs[0].steps_run == 30);
  CHECK(recs[1].steps_run == 60);
}

TEST_CASE("nnz-scaled reinit variance") {
  const auto spec = build_lenet300();
  MaskSnapshot snap;
  Rng r(3);
  for (const auto& l : spec.weight_layers()) {
    SparsityMask m(l.size, true);
    if (l.name == "fc1") {
      // Exactly 90% masked: 23520 of 235200 kept.
      for (std::size_t i = 0; i < l.size; ++i) m.set(i, i % 10 == 0);
    }
    snap.layers.push_back(l.name);
    snap.masks.push_back(m);
  }
  REQUIRE(snap.masks[0].count_kept() == 23520);
  const auto scaled = reinit_nnz_scaled(spec, snap, Rng(8));
  const auto standard = init_model<float>(spec, InitOptions{Method::Magnitude}, Rng(8));
  const auto idx = spec.weight_layer_indices();
  const double lim = glorot_limit(spec.layers[idx[0]]);
  double sq = 0;
  const auto& w = scaled.layers[idx[0]].weight;
  for (float v : w.data()) sq += double(v) * v;
  const double var = sq / w.size();
  CHECK(var == doctest::Approx(10.0 * lim * lim / 3.0).epsilon(0.05));
  // Dense-mask layers keep the standard distribution exactly.
  CHECK(scaled.layers[idx[1]].weight.identical(standard.layers[idx[1]].weight));
  CHECK(scaled.layers[idx[2]].weight.identical(standard.layers[idx[2]].weight));

  snap.masks[2].fill(false);
  CHECK_THROWS_AS(reinit_nnz_scaled(spec, snap, Rng(8)), ValidationError);
}

TEST_CASE("learning-rate schemes") {
  LrSchedule base;
  base.base = 0.1;
  base.warmup_steps = 10;
  base.boundaries = {100, 200};
  const auto scaled = lr_for_scheme(base, LrScheme::ScaledRegions, 300);
  CHECK(scaled.boundaries == std::vector<Step>{200, 400});
  CHECK(scaled.warmup_steps == 20);
  for (Step t : {20, 150, 250, 299}) CHECK(scaled.at(2 * t) == doctest::Approx(base.at(t)));

  const auto ext = lr_for_scheme(base, LrScheme::ExtendedFinal, 300);
  CHECK(ext.at(550) == doctest::Approx(base.at(299)));

  const auto rep = lr_for_scheme(base, LrScheme::RepeatedDecay, 300, 100);
  CHECK(rep.boundaries == std::vector<Step>{100, 200, 300, 400, 500});
  CHECK(rep.at(550) == doctest::Approx(0.1 * std::pow(0.1, 5)));
  CHECK(rep.warmup_steps == 10);
  CHECK(lr_for_scheme(base, LrScheme::RepeatedDecayNoWarmup, 300, 100).warmup_steps == 0);
  CHECK(lr_for_scheme(base, LrScheme::RepeatedDecay, 300).boundaries.front() == 100);

  LrSchedule lin;
  lin.kind = LrSchedule::Kind::Linear;
  lin.base = 1.0;
  const auto s = lr_for_scheme(lin, LrScheme::ScaledRegions, 100);
  CHECK(s.total_steps == 200);
  CHECK(s.at(100) == doctest::Approx(0.5));
}

TEST_CASE("compare aggregates by variant and level") {
  auto rec = [](double acc, bool failed = false) {
    TrainingRecord r;
    r.test_accuracy = acc;
    r.failed = failed;
    return r;
  };
  const std::vector<VariantRun> baselines = {{"pruned", 0.9, rec(0.97)}, {"pruned", 0.9, rec(0.97)}};
  SUBCASE("identical records give zero gap") {
    const auto rows = compare(baselines, baselines);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].gap == 0.0);
    CHECK(rows[0].runs == 2);
  }
  SUBCASE("shape and statistics") {
    const std::vector<VariantRun> runs = {{"scratch-e/fresh-standard", 0.9, rec(0.95)},
                                          {"scratch-e/fresh-standard", 0.9004, rec(0.96)},
                                          {"scratch-b/fresh-standard", 0.9, rec(0.965)},
                                          {"scratch-e/fresh-standard", 0.5, rec(0.98)},
                                          {"scratch-b/fresh-standard", 0.5, rec(0, true)}};
    CHECK_THROWS_AS(compare(runs, baselines), ValidationError);  // no baseline at 0.5
    auto both = baselines;
    both.push_back({"pruned", 0.5, rec(0.985)});
    const auto rows = compare(runs, both);
    CHECK(rows.size() == 4);  // 2 variants x 2 levels
    const auto it = std::find_if(rows.begin(), rows.end(), [](const ComparisonRow& r) {
      return r.variant == "scratch-e/fresh-standard" && r.sparsity_level == 0.9;
    });
    REQUIRE(it != rows.end());
    CHECK(it->runs == 2);
    CHECK(it->mean == doctest::Approx(0.955));
    CHECK(it->min == 0.95);
    CHECK(it->max == 0.96);
    CHECK(it->gap == doctest::Approx(0.015));
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i - 1].sparsity_level <= rows[i].sparsity_level);
    const auto f = std::find_if(rows.begin(), rows.end(), [](const ComparisonRow& r) { return r.failed > 0; });
    REQUIRE(f != rows.end());
    CHECK(f->failed == 1);
  }
}
