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

#include "sparsekit/magnitude.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "sparsekit/schedule.hpp"

namespace sparsekit {

GradMode parse_grad_mode(std::string_view name) {
  if (name == "dense") return GradMode::Dense;
  if (name == "masked") return GradMode::Masked;
  throw ValidationError("unknown grad_mode '" + std::string(name) + "' (dense|masked)");
}

std::string_view to_string(GradMode mode) { return mode == GradMode::Dense ? "dense" : "masked"; }

template <class T>
void magnitude_select(std::span<const T> w, SparsityMask& mask, std::size_t zeros) {
  const std::size_t n = w.size();
  if (mask.size() != n) mask = SparsityMask(n, true);
  zeros = std::min(zeros, n);
  mask.fill(true);
  if (zeros == 0) return;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto smaller = [&](std::size_t a, std::size_t b) {
    const T ma = std::abs(w[a]), mb = std::abs(w[b]);
    return ma < mb || (ma == mb && a < b);
  };
  if (zeros < n) {
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(zeros),
                     order.end(), smaller);
  }
  for (std::size_t i = 0; i < zeros; ++i) mask.set(order[i], false);
}

template <class T>
void magnitude_prune_count(BasicMaskedLayer<T>& layer, std::size_t zeros) {
  magnitude_select(std::span<const T>(layer.weights.data()), layer.mask, zeros);
}

template <class T>
void magnitude_prune_step(BasicMaskedLayer<T>& layer, double target) {
  if (!(target >= 0.0 && target <= 1.0)) {
    throw ValidationError("magnitude prune target must lie in [0, 1]");
  }
  layer.target_sparsity = target;
  magnitude_prune_count(layer, zeros_for_fraction(target, layer.weights.size()));
}

template <class T>
Var<T> masked_weights(Tape<T>& tape, BasicTensor<T>& weights, const SparsityMask& mask,
                      GradMode mode) {
  if (mask.size() != weights.size()) {
    throw ValidationError("mask length " + std::to_string(mask.size()) +
                          " does not match weight count " + std::to_string(weights.size()));
  }
  Var<T> w = tape.param(weights);
  BasicTensor<T> effective(weights.dims(), std::vector<T>(weights.data().begin(), weights.data().end()));
  mask.apply(effective.data());
  return tape.record("masked_weights", std::move(effective), {w},
                     [iw = w.id, &mask, mode](Tape<T>& t, std::size_t self) {
                       auto g = t.grad(self);
                       auto gw = t.grad(iw);
                       if (mode == GradMode::Dense) {
                         for (std::size_t i = 0; i < g.size(); ++i) gw[i] += g[i];
                       } else {
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           if (mask.kept(i)) gw[i] += g[i];
                         }
                       }
                     });
}

template <class T>
Var<T> masked_forward(Tape<T>& tape, BasicMaskedLayer<T>& layer, const LinearGeometry& geometry,
                      Var<T> input, GradMode mode) {
  return apply_linear(geometry, input, masked_weights(tape, layer.weights, layer.mask, mode));
}

template <class T>
void route_gradients(BasicTensor<T>& weights, const SparsityMask& mask, GradMode mode) {
  if (mode == GradMode::Dense || !weights.has_grad()) return;
  auto g = weights.grad();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!mask.kept(i)) g[i] = T{0};
  }
}

#define SPARSEKIT_INSTANTIATE(T)                                                              \
  template void magnitude_select<T>(std::span<const T>, SparsityMask&, std::size_t);            \
  template void magnitude_prune_count<T>(BasicMaskedLayer<T>&, std::size_t);                  \
  template void magnitude_prune_step<T>(BasicMaskedLayer<T>&, double);                        \
  template Var<T> masked_weights<T>(Tape<T>&, BasicTensor<T>&, const SparsityMask&, GradMode); \
  template Var<T> masked_forward<T>(Tape<T>&, BasicMaskedLayer<T>&, const LinearGeometry&,     \
                                    Var<T>, GradMode);                                        \
  template void route_gradients<T>(BasicTensor<T>&, const SparsityMask&, GradMode);

SPARSEKIT_INSTANTIATE(float)
SPARSEKIT_INSTANTIATE(double)
#undef SPARSEKIT_INSTANTIATE

}  // namespace sparsekit
