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
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "sparsekit/gradcheck.hpp"
#include "sparsekit/ops.hpp"
#include "sparsekit/optimizer.hpp"
#include "sparsekit/rng.hpp"
#include "sparsekit/tape.hpp"

using namespace sparsekit;

namespace {

TensorD random_tensor(Shape dims, std::uint64_t seed, double lo = -1, double hi = 1) {
  TensorD t(std::move(dims));
  Rng(seed).fill_uniform(t.data(), lo, hi);
  return t;
}

std::vector<double> as_vector(const TensorD& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("tensor shape contract") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK_THROWS_AS(Tensor({2, 0}), ValidationError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>(3)), ValidationError);
  CHECK_THROWS_AS(t.reshape({4}), ValidationError);
  t.reshape({3, 2});
  CHECK(t.dims() == Shape{3, 2});
}

TEST_CASE("rng replays from identical state") {
  Rng a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  const Rng saved = c;
  std::vector<double> first(10), again(10);
  for (double& v : first) v = c.normal();
  Rng d = saved;
  for (double& v : again) v = d.normal();
  CHECK(first == again);

  // Different substreams diverge.
  CHECK(Rng(1).substream(1).next_u64() != Rng(1).substream(2).next_u64());

  // uniform stays inside the open interval; below() stays in range.
  Rng e(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = e.uniform();
    CHECK((u > 0.0 && u < 1.0));
    CHECK(e.below(7) < 7u);
  }
}

TEST_CASE("rng first moments") {
  Rng r(11);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("matmul hand cases") {
  Tape<float> tape;
  auto id = tape.constant(Tensor({2, 2}, {1, 0, 0, 1}));
  auto b = tape.constant(Tensor({2, 2}, {5, 6, 7, 8}));
  CHECK(ops::matmul(id, b).value().identical(Tensor({2, 2}, {5, 6, 7, 8})));
  auto r = tape.constant(Tensor({1, 2}, {1, 2}));
  auto c = tape.constant(Tensor({2, 1}, {3, 4}));
  CHECK(ops::matmul(r, c).value()[0] == 11.0f);
  CHECK_THROWS_AS(ops::matmul(r, r), ValidationError);
}

TEST_CASE("matmul and conv2d match naive oracles on random inputs") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng dims(seed);
    const std::size_t m = 1 + dims.below(8), k = 1 + dims.below(8), n = 1 + dims.below(8);
    TensorD a = random_tensor({m, k}, seed * 3), b = random_tensor({k, n}, seed * 5);
    Tape<double> tape;
    const auto got = ops::matmul(tape.constant(a), tape.constant(b)).value();
    const auto want = oracle::matmul(as_vector(a), as_vector(b), m, k, n);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng dims(seed + 100);
    const std::size_t n = 1 + dims.below(2), c = 1 + dims.below(3), f = 1 + dims.below(3);
    const std::size_t kh = 1 + dims.below(3), kw = kh;
    const std::size_t h = kh + dims.below(6), w = kw + dims.below(6);
    const std::size_t stride = 1 + dims.below(2), pad = dims.below(2);
    Tensor x({n, c, h, w}), kern({f, c, kh, kw});
    Rng(seed).fill_uniform(x.data(), -1, 1);
    Rng(seed + 1).fill_uniform(kern.data(), -1, 1);
    Tape<float> tape;
    const auto got = ops::conv2d(tape.constant(x), tape.constant(kern), {stride, pad}).value();
    std::size_t ho = 0, wo = 0;
    const auto want = oracle::conv2d({x.data().begin(), x.data().end()}, {kern.data().begin(), kern.data().end()},
                                     n, c, h, w, f, kh, kw, stride, pad, ho, wo);
    REQUIRE(got.dims() == Shape{n, f, ho, wo});
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-5);
  }
}

TEST_CASE("conv2d hand cases") {
  Tape<float> tape;
  Tensor x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto y = ops::conv2d(tape.constant(x), tape.constant(Tensor({1, 1, 1, 1}, 1.0f))).value();
  CHECK(y.identical(x));
  auto z = ops::conv2d(tape.constant(Tensor({1, 1, 4, 4}, 1.0f)), tape.constant(Tensor({1, 1, 2, 2}, 1.0f)),
                       {2, 0})
               .value();
  CHECK(z.identical(Tensor({1, 1, 2, 2}, 4.0f)));
  CHECK_THROWS_AS(ops::conv2d(tape.constant(Tensor({1, 1, 2, 2})), tape.constant(Tensor({1, 1, 3, 3}))),
                  ValidationError);
}

TEST_CASE("backward basics") {
  Tensor w({3}, {1.5f, -2.0f, 0.25f});
  {
    Tape<float> tape;
    tape.backward(ops::sum(tape.param(w)));
    for (float g : w.grad()) CHECK(g == 1.0f);
  }
  {
    Tape<float> tape;
    tape.backward(ops::scale(ops::sum(ops::square(tape.param(w))), 0.5));
    for (std::size_t i = 0; i < 3; ++i) CHECK(w.grad()[i] == doctest::Approx(w[i]));
  }
  Tape<float> tape;
  auto loss = ops::sum(tape.param(w));
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), ValidationError);
  Tape<float> t2;
  CHECK_THROWS_AS(t2.backward(t2.param(w)), ValidationError);
}

TEST_CASE("non-finite values raise NumericalError") {
  Tape<float> tape;
  Tensor bad({2}, {1.0f, std::numeric_limits<float>::quiet_NaN()});
  CHECK_THROWS_AS(tape.constant(bad), NumericalError);
  CHECK_THROWS_AS(tape.param(bad), NumericalError);
  Tensor big({1}, 100.0f);
  CHECK_THROWS_AS(ops::exp(tape.constant(big)), NumericalError);
}

TEST_CASE("optimizer recurrences") {
  SUBCASE("plain sgd") {
    Tensor w({1}, 1.0f);
    w.zero_grad();
    w.grad()[0] = 0.5f;
    BasicOptimizer<float> opt({OptimizerKind::SgdMomentum, 1.0, 0.0});
    Tensor* p[] = {&w};
    opt.step(p);
    CHECK(w[0] == 0.5f);
    CHECK(opt.steps() == 1);
  }
  SUBCASE("momentum second delta") {
    TensorD w({1}, 0.0);
    w.zero_grad();
    w.grad()[0] = 1.0;
    BasicOptimizer<double> opt({OptimizerKind::SgdMomentum, 0.1, 0.9});
    TensorD* p[] = {&w};
    opt.step(p);
    const double after_first = w[0];
    opt.step(p);
    CHECK(after_first - w[0] == doctest::Approx(0.19).epsilon(1e-12));
  }
  SUBCASE("adam with zero gradient") {
    Tensor w({2}, {0.3f, -0.7f});
    w.zero_grad();
    BasicOptimizer<float> opt({OptimizerKind::Adam, 1e-3});
    Tensor* p[] = {&w};
    for (int i = 0; i < 5; ++i) opt.step(p);
    CHECK(w[0] == 0.3f);
    CHECK(w[1] == -0.7f);
  }
  SUBCASE("shape mismatch") {
    Tensor a({2}), b({3});
    a.zero_grad();
    b.zero_grad();
    BasicOptimizer<float> opt({});
    Tensor* p1[] = {&a};
    opt.step(p1);
    Tensor* p2[] = {&b};
    CHECK_THROWS_AS(opt.step(p2), ValidationError);
    CHECK_THROWS_AS(BasicOptimizer<float>({OptimizerKind::Adam, -1.0}), ValidationError);
  }
}

TEST_CASE("gradcheck covers every differentiable op") {
  TensorD x = random_tensor({2, 1, 6, 6}, 1), k = random_tensor({3, 1, 3, 3}, 2), cb = random_tensor({3}, 3);
  TensorD w = random_tensor({27, 4}, 4), b = random_tensor({4}, 5);
  const std::vector<std::int32_t> labels = {1, 3};
  auto loss = [&](Tape<double>& t) {
    auto h = ops::relu(ops::add_channel_bias(ops::conv2d(t.param(x), t.param(k), {1, 1}), t.param(cb)));
    auto logits = ops::add_row_bias(ops::matmul(ops::flatten(ops::maxpool2d(h, 2)), t.param(w)), t.param(b));
    auto e = ops::sqrt_eps(ops::exp(ops::scale(ops::square(t.param(b)), 0.1)), 1e-8);
    return ops::add(ops::softmax_cross_entropy(logits, std::span<const std::int32_t>(labels)),
                    ops::sum(ops::mul(e, e)));
  };
  const auto report = gradcheck({{"x", &x}, {"k", &k}, {"cb", &cb}, {"w", &w}, {"b", &b}}, loss);
  CHECK(report.entries.size() == 5);
  CHECK(report.max_rel_error() < 1e-4);
}

TEST_CASE("gradcheck on a linear layer is tight") {
  TensorD x = random_tensor({4, 5}, 10), w = random_tensor({5, 3}, 11), b = random_tensor({3}, 12);
  const std::vector<std::int32_t> labels = {0, 1, 2, 1};
  auto loss = [&](Tape<double>& t) {
    return ops::softmax_cross_entropy(ops::add_row_bias(ops::matmul(t.constant_ref(x), t.param(w)), t.param(b)),
                                      std::span<const std::int32_t>(labels));
  };
  CHECK(gradcheck({{"w", &w}, {"b", &b}}, loss).max_rel_error() < 1e-5);
}

TEST_CASE("softmax cross-entropy value") {
  Tape<double> tape;
  auto logits = tape.constant(TensorD({1, 3}, {1.0, 2.0, 3.0}));
  const std::vector<std::int32_t> y = {2};
  const double want = -std::log(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  CHECK(ops::softmax_cross_entropy(logits, std::span<const std::int32_t>(y)).value()[0] ==
        doctest::Approx(want).epsilon(1e-12));
  const std::vector<std::int32_t> bad = {3};
  CHECK_THROWS_AS(ops::softmax_cross_entropy(logits, std::span<const std::int32_t>(bad)), ValidationError);
}
