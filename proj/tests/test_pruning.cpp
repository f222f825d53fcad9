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
#include <numeric>
#include <vector>

#include "sparsekit/linear.hpp"
#include "sparsekit/magnitude.hpp"
#include "sparsekit/ops.hpp"
#include "sparsekit/optimizer.hpp"
#include "sparsekit/random_prune.hpp"
#include "sparsekit/schedule.hpp"

using namespace sparsekit;

namespace {

std::vector<std::size_t> masked_indices(const SparsityMask& m) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m.kept(i)) out.push_back(i);
  }
  return out;
}

// Reference selection: full stable sort by (|w|, index).
std::vector<std::size_t> sort_oracle(const Tensor& w, std::size_t zeros) {
  std::vector<std::size_t> idx(w.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(w[a]) < std::abs(w[b]);
  });
  idx.resize(zeros);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

TEST_CASE("sparsity mask bit packing") {
  SparsityMask m(70, true);
  CHECK(m.count_kept() == 70);
  m.set(0, false);
  m.set(69, false);
  CHECK(m.count_masked() == 2);
  CHECK(m.sparsity() == doctest::Approx(2.0 / 70));
  const auto bytes = m.to_bytes();
  CHECK(bytes.size() == 9);
  CHECK((bytes[0] & 1) == 0);  // LSB-first
  CHECK(SparsityMask::from_bytes(bytes, 70) == m);
  SparsityMask all(70, true);
  CHECK(m.masked_subset_of(m));
  CHECK(all.masked_subset_of(m));
  CHECK_FALSE(m.masked_subset_of(all));
}

TEST_CASE("magnitude prune examples") {
  MaskedLayer l(Tensor({4}, {1, -2, 3, -4}));
  magnitude_prune_step(l, 0.5);
  CHECK(masked_indices(l.mask) == std::vector<std::size_t>{0, 1});
  magnitude_prune_step(l, 0.0);
  CHECK(l.mask.count_kept() == 4);
  MaskedLayer ties(Tensor({4}, 1.0f));
  magnitude_prune_step(ties, 0.5);
  CHECK(masked_indices(ties.mask) == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(magnitude_prune_step(l, 1.5), ValidationError);
}

TEST_CASE("magnitude prune matches a sort oracle") {
  Rng r(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + r.below(300);
    Tensor w({n});
    // Coarse values force plenty of ties.
    for (auto& v : w.data()) v = static_cast<float>(static_cast<int>(r.below(21)) - 10) / 4.0f;
    MaskedLayer l(w);
    const double target = r.uniform();
    magnitude_prune_step(l, target);
    const std::size_t zeros = zeros_for_fraction(target, n);
    CHECK(l.mask.count_masked() == zeros);
    CHECK(masked_indices(l.mask) == sort_oracle(w, zeros));
  }
}

TEST_CASE("masked forward equals dense forward on zeroed weights") {
  Tensor x({3, 5}), w({5, 4});
  Rng(1).fill_uniform(x.data(), -1, 1);
  Rng(2).fill_uniform(w.data(), -1, 1);
  MaskedLayer l(w);
  Rng r(3);
  for (std::size_t i = 0; i < l.mask.size(); ++i) l.mask.set(i, r.below(2) == 0);
  Tensor zeroed = w;
  l.mask.apply(zeroed.data());
  Tape<float> tape;
  const auto got = masked_forward(tape, l, LinearGeometry::dense(), tape.constant(x)).value();
  const auto want = ops::matmul(tape.constant(x), tape.constant(zeroed)).value();
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-6);

  l.mask.fill(false);
  Tape<float> t2;
  for (float v : masked_forward(t2, l, LinearGeometry::dense(), t2.constant(x)).value().data()) CHECK(v == 0.0f);
  l.mask = SparsityMask(3, true);
  Tape<float> t3;
  CHECK_THROWS_AS(masked_forward(t3, l, LinearGeometry::dense(), t3.constant(x)), ValidationError);
}

TEST_CASE("gradient routing modes") {
  Tensor w({2}, {1.0f, 2.0f});
  SparsityMask m(2, true);
  m.set(0, false);
  for (GradMode mode : {GradMode::Dense, GradMode::Masked}) {
    Tape<float> tape;
    tape.backward(ops::sum(masked_weights(tape, w, m, mode)));
    route_gradients(w, m, mode);
    CHECK(w.grad()[1] == 1.0f);
    CHECK(w.grad()[0] == (mode == GradMode::Dense ? 1.0f : 0.0f));
  }
  CHECK(parse_grad_mode("masked") == GradMode::Masked);
  CHECK_THROWS_AS(parse_grad_mode("sparse"), ValidationError);
}

TEST_CASE("masked weight regrows under a persistent gradient") {
  // Two weights; loss = -(w0 + 0.1 * w1) with w0 initially small and pruned.
  // Straight-through updates grow w0 until the next prune event re-keeps it.
  MaskedLayer l(Tensor({2}, {0.1f, 1.0f}));
  magnitude_prune_step(l, 0.5);
  REQUIRE_FALSE(l.mask.kept(0));
  BasicOptimizer<float> opt({OptimizerKind::SgdMomentum, 0.5, 0.0});
  Tensor* params[] = {&l.weights};
  for (int step = 0; step < 5; ++step) {
    Tape<float> tape;
    auto eff = masked_weights(tape, l.weights, l.mask, GradMode::Dense);
    auto coef = tape.constant(Tensor({2}, {-1.0f, -0.1f}));
    tape.backward(ops::sum(ops::mul(eff, coef)));
    route_gradients(l, GradMode::Dense);
    opt.step(params);
  }
  magnitude_prune_step(l, 0.5);
  CHECK(l.mask.kept(0));
  CHECK_FALSE(l.mask.kept(1));

  // Zero gradient leaves a masked weight untouched.
  MaskedLayer z(Tensor({2}, {0.1f, 1.0f}));
  magnitude_prune_step(z, 0.5);
  Tape<float> tape;
  tape.backward(ops::scale(ops::sum(masked_weights(tape, z.weights, z.mask, GradMode::Dense)), 0.0));
  Tensor* zp[] = {&z.weights};
  BasicOptimizer<float> fresh({OptimizerKind::SgdMomentum, 0.5, 0.0});
  fresh.step(zp);
  CHECK(z.weights[0] == 0.1f);
}

TEST_CASE("all-ones mask trains identically to dense") {
  Tensor a({6}), b({6});
  Rng(8).fill_uniform(a.data(), -1, 1);
  b = a;
  SparsityMask ones(6, true);
  BasicOptimizer<float> oa({}), ob({});
  Tensor* pa[] = {&a};
  Tensor* pb[] = {&b};
  for (int s = 0; s < 10; ++s) {
    Tape<float> t1, t2;
    t1.backward(ops::sum(ops::square(masked_weights(t1, a, ones, GradMode::Dense))));
    t2.backward(ops::sum(ops::square(t2.param(b))));
    oa.step(pa);
    ob.step(pb);
  }
  CHECK(a.identical(b));
}

TEST_CASE("random prune counting and monotonicity") {
  MaskedLayer l(Tensor({4}, 1.0f));
  Rng rng(1);
  random_prune_step(l, 0.0, rng);
  CHECK(l.mask.count_kept() == 4);
  random_prune_step(l, 0.25, rng);
  const SparsityMask before = l.mask;
  random_prune_step(l, 0.5, rng);
  CHECK(l.mask.count_masked() == 2);
  CHECK(before.masked_subset_of(l.mask));
  CHECK_THROWS_AS(random_prune_step(l, 0.25, rng), ValidationError);
}

TEST_CASE("random prune ignores weight values") {
  Tensor w({50});
  Rng(2).fill_uniform(w.data(), -1, 1);
  Tensor permuted = w;
  std::reverse(permuted.data().begin(), permuted.data().end());
  MaskedLayer a(w), b(permuted);
  Rng ra(77), rb(77);
  random_prune_step(a, 0.3, ra);
  random_prune_step(b, 0.3, rb);
  random_prune_step(a, 0.7, ra);
  random_prune_step(b, 0.7, rb);
  CHECK(a.mask == b.mask);
}

TEST_CASE("random prune is uniform over the kept set") {
  // 10 weights, one already masked; prune one more 10^4 times.
  std::vector<int> counts(10, 0);
  Rng rng(2024);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    MaskedLayer l(Tensor({10}, 1.0f));
    l.mask.set(3, false);
    random_prune_step(l, 0.2, rng);
    for (std::size_t i = 0; i < 10; ++i) {
      if (i != 3 && !l.mask.kept(i)) ++counts[i];
    }
  }
  const double expected = trials / 9.0;
  double chi2 = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    if (i == 3) continue;
    chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  // 99th percentile of chi-square with 8 degrees of freedom.
  CHECK(chi2 < 20.090);
}
