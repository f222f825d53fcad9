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

#include <benchmark/benchmark.h>

#include "sparsekit/checkpoint.hpp"
#include "sparsekit/l0.hpp"
#include "sparsekit/magnitude.hpp"
#include "sparsekit/model.hpp"
#include "sparsekit/report.hpp"
#include "sparsekit/variational_dropout.hpp"

using namespace sparsekit;

namespace {

Tensor uniform(Shape dims, std::uint64_t seed) {
  Tensor t(std::move(dims));
  Rng(seed).fill_uniform(t.data(), -1.0, 1.0);
  return t;
}

std::vector<std::int32_t> labels(std::size_t n) {
  std::vector<std::int32_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<std::int32_t>(i % 10);
  return y;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = uniform({100, n}, 1), b = uniform({n, 300}, 2);
  for (auto _ : state) {
    Tape<float> tape;
    benchmark::DoNotOptimize(ops::matmul(tape.constant(a), tape.constant(b)).value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * 100 * n * 300);
}
BENCHMARK(BM_Matmul)->Arg(100)->Arg(784);

void BM_Conv2d(benchmark::State& state) {
  const Tensor x = uniform({100, 1, 28, 28}, 3), k = uniform({20, 1, 5, 5}, 4);
  for (auto _ : state) {
    Tape<float> tape;
    benchmark::DoNotOptimize(ops::conv2d(tape.constant(x), tape.constant(k)).value().data().data());
  }
}
BENCHMARK(BM_Conv2d)->Unit(benchmark::kMillisecond);

// One forward + backward pass of a full model, batch 100.
void train_step(benchmark::State& state, const ModelSpec& spec, Method method) {
  auto params = init_model<float>(spec, InitOptions{method}, Rng(1));
  const Tensor x = uniform({100, 1, 28, 28}, 5);
  const auto y = labels(100);
  ForwardOptions fo;
  fo.method = method;
  Rng rng(9);
  for (auto _ : state) {
    Tape<float> tape;
    auto logits = model_forward(tape, spec, params, tape.constant(x), fo, rng);
    auto loss = ops::softmax_cross_entropy(logits, std::span<const std::int32_t>(y));
    if (method == Method::VariationalDropout || method == Method::L0) {
      loss = ops::add(loss, ops::scale(model_regularizer(tape, spec, params, method, {}, 8.0), 1e-5));
    }
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.value()[0]);
  }
}

void BM_TrainStepLenet300(benchmark::State& state) {
  train_step(state, build_lenet300(), static_cast<Method>(state.range(0)));
}
BENCHMARK(BM_TrainStepLenet300)
    ->Arg(static_cast<int>(Method::None))
    ->Arg(static_cast<int>(Method::Magnitude))
    ->Arg(static_cast<int>(Method::VariationalDropout))
    ->Arg(static_cast<int>(Method::L0))
    ->Unit(benchmark::kMillisecond);

void BM_TrainStepLenet5(benchmark::State& state) {
  train_step(state, build_lenet5(), static_cast<Method>(state.range(0)));
}
BENCHMARK(BM_TrainStepLenet5)
    ->Arg(static_cast<int>(Method::None))
    ->Arg(static_cast<int>(Method::VariationalDropout))
    ->Unit(benchmark::kMillisecond);

void BM_MagnitudePrune(benchmark::State& state) {
  MaskedLayer layer(uniform({784, 300}, 6));
  for (auto _ : state) {
    magnitude_prune_step(layer, 0.9);
    benchmark::DoNotOptimize(layer.mask.count_kept());
  }
  state.SetItemsProcessed(state.iterations() * layer.weights.size());
}
BENCHMARK(BM_MagnitudePrune);

void BM_HardConcreteSample(benchmark::State& state) {
  const HardConcreteParams g{Tensor({784, 300}, 2.197f), {}};
  Rng rng(7);
  for (auto _ : state) benchmark::DoNotOptimize(hc_sample(g, rng).data().data());
  state.SetItemsProcessed(state.iterations() * g.log_alpha.size());
}
BENCHMARK(BM_HardConcreteSample);

void BM_VdKl(benchmark::State& state) {
  const VDLayerParams p(uniform({784, 300}, 8), -10.0);
  for (auto _ : state) benchmark::DoNotOptimize(vd_kl(p, 8.0));
  state.SetItemsProcessed(state.iterations() * p.theta.size());
}
BENCHMARK(BM_VdKl);

void BM_CheckpointRoundTrip(benchmark::State& state) {
  Checkpoint ck;
  ck.add_tensor("fc1.weight", uniform({784, 300}, 9));
  ck.add_mask("fc1.mask", SparsityMask(235200, true));
  for (auto _ : state) {
    const auto bytes = ck.serialize();
    benchmark::DoNotOptimize(Checkpoint::deserialize(bytes).records().size());
  }
}
BENCHMARK(BM_CheckpointRoundTrip)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
