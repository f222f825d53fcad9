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

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include <unistd.h>

#include "sparsekit/checkpoint.hpp"
#include "sparsekit/config.hpp"
#include "sparsekit/report.hpp"

using namespace sparsekit;

namespace {

namespace fs = std::filesystem;

// Bitwise reflected CRC-32 (polynomial 0xEDB88320).
std::uint32_t crc32_oracle(const std::uint8_t* p, std::size_t n) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) {
    c ^= p[i];
    for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0xEDB88320u & (0u - (c & 1u)));
  }
  return ~c;
}

void put_le(std::vector<std::uint8_t>& b, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

fs::path temp_path(const std::string& stem) {
  static int counter = 0;
  return fs::temp_directory_path() /
         ("sparsekit_" + stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
}

SweepRow row(double sparsity, double acc, std::uint64_t seed = 1, std::string hash = "h") {
  SweepRow r;
  r.method = "magnitude";
  r.test_sparsity = sparsity;
  r.train_sparsity = sparsity;
  r.test_accuracy = acc;
  r.seed = seed;
  r.config_hash = std::move(hash);
  return r;
}

}  // namespace

TEST_CASE("config parsing and validation") {
  const auto c = Config::parse(
      "# comment line\n"
      "train.method = magnitude   # trailing\n"
      "\n"
      "prune.final_sparsity=0.75\n"
      "train.lr_boundaries = 100:200\n");
  CHECK(c.get("train.method") == "magnitude");
  CHECK(c.get_double("prune.final_sparsity") == 0.75);
  CHECK(c.get_list("train.lr_boundaries") == std::vector<std::string>{"100", "200"});
  CHECK(c.is_default("model.name"));
  CHECK_FALSE(c.is_default("train.method"));
  CHECK_THROWS_AS(Config::parse("train.lrr = 1\n"), ValidationError);
  CHECK_THROWS_AS(Config::parse("no equals sign\n"), ValidationError);
  CHECK_THROWS_AS(Config().get_double("model.name"), ValidationError);
  CHECK_THROWS_AS(Config::load("/nonexistent/missing.cfg"), ValidationError);

  for (const auto& k : config_keys()) {
    CHECK_FALSE(k.doc.empty());
    CHECK(Config().get(k.name) == k.default_value);
  }
  const auto t = train_config_from(c);
  CHECK(t.method == Method::Magnitude);
  CHECK(t.prune.final_sparsity == 0.75);
  CHECK(t.lr.boundaries == std::vector<Step>{100, 200});
  // Canonical text round-trips.
  CHECK(Config::parse(c.to_text()).values() == c.values());
}

TEST_CASE("config sweeps and hashing") {
  auto c = Config::parse("prune.final_sparsity = 0.5,0.7,0.9\ntrain.method = magnitude,random\n");
  CHECK(c.is_sweep());
  CHECK_THROWS_AS(train_config_from(c), ValidationError);
  const auto runs = c.expand();
  CHECK(runs.size() == 6);
  std::set<std::uint64_t> hashes;
  for (const auto& r : runs) {
    CHECK_FALSE(r.is_sweep());
    hashes.insert(r.hash());
  }
  CHECK(hashes.size() == 6);

  Config a, b;
  CHECK(a.hash() == b.hash());
  b.set("train.seed", "99");
  CHECK(a.hash() == b.hash());  // seeds are not part of the key
  b.set("train.lr", "0.01");
  CHECK(a.hash() != b.hash());
  CHECK(a.hash_hex().size() == 16);
}

TEST_CASE("checkpoint byte layout") {
  Checkpoint ck;
  ck.add_text("t", "ab");
  const auto bytes = ck.serialize();
  std::vector<std::uint8_t> want = {'S', 'P', 'R', 'S'};
  put_le(want, 1, 4);  // version
  put_le(want, 1, 4);  // records
  put_le(want, 1, 4);  // name length
  want.push_back('t');
  want.push_back(2);   // text
  put_le(want, 1, 4);  // rank
  put_le(want, 2, 8);  // dim
  want.push_back('a');
  want.push_back('b');
  put_le(want, crc32_oracle(want.data(), want.size()), 4);
  CHECK(bytes == want);

  Checkpoint f;
  f.add_tensor("w", Tensor({2}, {1.5f, -0.0f}));
  const auto fb = f.serialize();
  // Payload floats are little-endian IEEE bits.
  std::uint32_t bits = 0;
  std::memcpy(&bits, fb.data() + fb.size() - 4 - 8, 4);
  CHECK(bits == std::bit_cast<std::uint32_t>(1.5f));
}

TEST_CASE("checkpoint round trip and corruption") {
  Checkpoint ck;
  Tensor w({2, 3});
  Rng(1).fill_uniform(w.data(), -1, 1);
  SparsityMask m(13, true);
  m.set(4, false);
  m.set(12, false);
  ck.add_tensor("w", w);
  ck.add_mask("m", m);
  ck.add_text("cfg", "a = b\n");
  CHECK_THROWS_AS(ck.add_text("cfg", "dup"), ValidationError);

  const auto bytes = ck.serialize();
  const auto back = Checkpoint::deserialize(bytes);
  CHECK(back.tensor("w").identical(w));
  CHECK(back.mask("m") == m);
  CHECK(back.text("cfg") == "a = b\n");
  CHECK(back.serialize() == bytes);

  auto flipped = bytes;
  flipped[20] ^= 0x01;
  CHECK_THROWS_AS(Checkpoint::deserialize(flipped), ValidationError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(Checkpoint::deserialize(magic), ValidationError);
  CHECK_THROWS_AS(Checkpoint::deserialize(std::span(bytes).first(bytes.size() - 7)), ValidationError);
  auto longer = bytes;
  longer.push_back(0);
  CHECK_THROWS_AS(Checkpoint::deserialize(longer), ValidationError);
  CHECK_THROWS_AS(back.tensor("missing"), ValidationError);

  const auto path = temp_path("ckpt");
  ck.save(path);
  CHECK(Checkpoint::load(path).serialize() == bytes);
  fs::remove(path);
}

TEST_CASE("run checkpoint reproduces test accuracy bit-exactly") {
  Config c = Config::parse(
      "train.method = magnitude\ntrain.steps = 20\ntrain.batch_size = 50\n"
      "prune.start_step = 0\nprune.end_step = 10\nprune.frequency = 2\nprune.final_sparsity = 0.6\n");
  const auto spec = model_from_config(c);
  const auto cfg = train_config_from(c);
  const auto data = synthetic_classification(200, 10, 2);
  const auto test = synthetic_classification(100, 10, 3);
  const auto rec = train(spec, cfg, data, &test);
  const auto path = temp_path("run");
  checkpoint_from_run(rec, c).save(path);
  const auto loaded = run_from_checkpoint(Checkpoint::load(path));
  fs::remove(path);
  CHECK(loaded.config.hash() == c.hash());
  CHECK(loaded.train.method == Method::Magnitude);
  for (std::size_t k : spec.weight_layer_indices()) {
    CHECK(loaded.record.final_state.layers[k].weight.identical(rec.final_state.layers[k].weight));
    CHECK(loaded.record.final_state.layers[k].mask == rec.final_state.layers[k].mask);
    CHECK(loaded.record.initial.layers[k].weight.identical(rec.initial.layers[k].weight));
  }
  const auto again = test_time_result(spec, loaded.record.final_state, test_time_options(loaded.train), test);
  CHECK(again.accuracy == rec.test_accuracy);
  CHECK(again.sparsity == rec.test_sparsity);
  CHECK(loaded.meta.at("method") == "magnitude");
}

TEST_CASE("flop counting") {
  const auto spec = build_lenet300();
  CHECK(count_dense_flops(spec) == 532400);
  std::vector<SparsityMask> masks;
  for (const auto& l : spec.weight_layers()) {
    SparsityMask m(l.size, true);
    for (std::size_t i = 0; i < l.size; ++i) m.set(i, i % 10 == 0);
    masks.push_back(m);
  }
  CHECK(count_flops(spec, masks) == 53240);

  // Linearity in effective nonzero counts.
  std::vector<double> scaled;
  for (const auto& l : spec.weight_layers()) scaled.push_back(0.978 * static_cast<double>(l.size));
  CHECK(std::abs(count_flops(spec, scaled) / (0.978 * 532400.0) - 1.0) < 1e-6);

  // Expected-L0 counting: one gate value everywhere.
  InitOptions o;
  o.method = Method::L0;
  const auto st = init_model<float>(spec, o, Rng(1));
  const double p = hc_nonzero_probability(static_cast<double>(st.layers[1].log_alpha[0]), HardConcreteShape{});
  CHECK(std::abs(l0_expected_flops(spec, st, {}) / (p * 532400.0) - 1.0) < 1e-6);

  // Convolutions count each weight once per output position.
  const auto l5 = build_lenet5();
  CHECK(count_dense_flops(l5) == 2ull * (500 * 576 + 25000 * 64 + 400000 + 5000));
  masks.pop_back();
  CHECK_THROWS_AS(count_flops(spec, masks), ValidationError);
}

TEST_CASE("pareto frontier examples") {
  CHECK(pareto_frontier({}).empty());
  CHECK(pareto_frontier({row(0.5, 0.9)}).size() == 1);
  const auto f = pareto_frontier({row(0.5, 0.9), row(0.6, 0.95)});
  REQUIRE(f.size() == 1);
  CHECK(f[0].test_sparsity == 0.6);
  auto other = row(0.7, 0.8);
  other.method = "random";
  CHECK_THROWS_AS(pareto_frontier({row(0.5, 0.9), other}), ValidationError);
  CHECK(frontier_series_csv(f) == "x,y\n0.6,0.95\n");
}

TEST_CASE("pareto frontier matches a brute-force dominance check") {
  Rng r(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < 50; ++i) {
      // Coarse grid forces ties on both axes.
      rows.push_back(row(static_cast<double>(r.below(10)) / 10.0, static_cast<double>(r.below(10)) / 10.0, i));
    }
    std::vector<SweepRow> want;
    for (const auto& a : rows) {
      bool dominated = false;
      for (const auto& b : rows) {
        if (b.test_sparsity >= a.test_sparsity && b.test_accuracy >= a.test_accuracy &&
            (b.test_sparsity > a.test_sparsity || b.test_accuracy > a.test_accuracy)) {
          dominated = true;
        }
      }
      if (!dominated) want.push_back(a);
    }
    auto got = pareto_frontier(rows);
    auto key = [](const SweepRow& x) { return std::tuple(x.test_sparsity, x.test_accuracy, x.seed); };
    std::sort(want.begin(), want.end(), [&](auto& a, auto& b) { return key(a) < key(b); });
    for (std::size_t i = 1; i < got.size(); ++i) {
      CHECK(std::pair(got[i - 1].test_sparsity, got[i - 1].test_accuracy) <=
            std::pair(got[i].test_sparsity, got[i].test_accuracy));
    }
    std::sort(got.begin(), got.end(), [&](auto& a, auto& b) { return key(a) < key(b); });
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(key(got[i]) == key(want[i]));
  }
}

TEST_CASE("sparsity distribution report") {
  const auto spec = build_lenet300();
  const auto layers = spec.weight_layers();
  CHECK_THROWS_AS(allocate_layer_targets(layers, 0.9, LayerPolicy::parse("fc1=dense")), ValidationError);
  auto build = [&](const std::vector<LayerTarget>& t) {
    std::vector<SparsityMask> ms;
    for (std::size_t j = 0; j < layers.size(); ++j) {
      SparsityMask m(layers[j].size, true);
      for (std::size_t i = 0; i < t[j].zeros; ++i) m.set(i, false);
      ms.push_back(m);
    }
    return ms;
  };
  for (const auto& l : sparsity_distribution_report(spec, build(allocate_layer_targets(layers, 0.9, {}))).layers) {
    CHECK(l.sparsity == doctest::Approx(0.9).epsilon(1e-4));
  }
  const auto feasible = allocate_layer_targets(layers, 0.1, LayerPolicy::parse("fc1=dense"));
  const auto masks = build(feasible);
  const auto rep = sparsity_distribution_report(spec, masks);
  REQUIRE(rep.layers.size() == 3);
  CHECK(rep.layers[0].sparsity == 0.0);
  double weighted = 0;
  std::size_t size = 0, nnz = 0;
  std::uint64_t flops = 0;
  for (const auto& l : rep.layers) {
    weighted += l.sparsity * static_cast<double>(l.size);
    size += l.size;
    nnz += l.nonzeros;
    flops += l.flops;
  }
  CHECK(rep.global.size == size);
  CHECK(rep.global.nonzeros == nnz);
  CHECK(rep.global.flops == flops);
  CHECK(rep.global.sparsity == doctest::Approx(weighted / static_cast<double>(size)).epsilon(1e-15));
  CHECK(rep.global.flops == count_flops(spec, masks));
  const auto csv = distribution_csv(rep);
  CHECK(csv.rfind("# flops", 0) == 0);
  CHECK(csv.find("layer,size,nonzeros,sparsity,flops\n") != std::string::npos);
  CHECK(csv.find("\nglobal,266200,") != std::string::npos);
}

TEST_CASE("sweep csv round trip and append-only uniqueness") {
  auto r = row(0.9, 0.975, 3, "abc");
  r.wall_clock = 12.5;
  r.steps = 12000;
  CHECK(SweepRow::from_csv(r.to_csv()).to_csv() == r.to_csv());
  CHECK_THROWS_AS(SweepRow::from_csv("a,b"), ValidationError);
  CHECK(sweep_csv({}) == SweepRow::csv_header() + "\n");

  const auto path = temp_path("sweep");
  {
    SweepWriter w(path);
    CHECK(w.append(r));
    CHECK_FALSE(w.append(r));
    auto s2 = r;
    s2.seed = 4;
    CHECK(w.append(s2));
  }
  {
    SweepWriter again(path);  // reopening keeps the keys
    CHECK(again.contains("abc", 3));
    CHECK_FALSE(again.append(r));
    std::vector<std::thread> pool;
    for (int t = 0; t < 4; ++t) {
      pool.emplace_back([&, t] {
        for (int i = 0; i < 25; ++i) {
          auto x = r;
          x.seed = 100 + static_cast<std::uint64_t>(i);  // all threads race on the same keys
          x.config_hash = "race";
          again.append(x);
        }
        (void)t;
      });
    }
    for (auto& th : pool) th.join();
  }
  const auto rows = read_sweep_csv(path);
  CHECK(rows.size() == 2 + 25);
  fs::remove(path);
}
