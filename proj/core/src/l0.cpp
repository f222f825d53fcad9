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

#include "sparsekit/l0.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "sparsekit/ops.hpp"

namespace sparsekit {
namespace {

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

void HardConcreteShape::validate() const {
  if (!(gamma < 0.0 && zeta > 1.0)) throw ValidationError("hard-concrete needs gamma < 0 < 1 < zeta");
  if (!(beta > 0.0 && beta <= 1.0)) throw ValidationError("hard-concrete beta must lie in (0, 1]");
}

double HardConcreteShape::l0_offset() const { return beta * std::log(-gamma / zeta); }

double log_alpha_for_dropout_rate(double rate) {
  if (!(rate > 0.0 && rate < 1.0)) throw ValidationError("dropout rate must lie in (0, 1)");
  return std::log((1.0 - rate) / rate);
}

double hc_gate(double log_alpha, double u, const HardConcreteShape& shape) {
  const double s = sigmoid((std::log(u) - std::log1p(-u) + log_alpha) / shape.beta);
  return std::clamp(s * (shape.zeta - shape.gamma) + shape.gamma, 0.0, 1.0);
}

double hc_test_gate(double log_alpha, const HardConcreteShape& shape) {
  return std::clamp(sigmoid(log_alpha) * (shape.zeta - shape.gamma) + shape.gamma, 0.0, 1.0);
}

double hc_nonzero_probability(double log_alpha, const HardConcreteShape& shape) {
  return sigmoid(log_alpha - shape.l0_offset());
}

template <class T>
BasicTensor<T> hc_sample(const BasicHardConcreteParams<T>& gates, Rng& rng) {
  BasicTensor<T> z(gates.log_alpha.dims());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = static_cast<T>(hc_gate(gates.log_alpha[i], rng.uniform(), gates.shape));
  }
  return z;
}

template <class T>
Var<T> hc_sample(Var<T> log_alpha, const HardConcreteShape& shape, std::span<const double> u) {
  const auto& la = log_alpha.value();
  if (u.size() != la.size()) throw ValidationError("hc_sample: one uniform per gate required");
  const double stretch = shape.zeta - shape.gamma;
  auto dz = std::make_shared<std::vector<double>>(la.size(), 0.0);
  BasicTensor<T> z(la.dims());
  for (std::size_t i = 0; i < la.size(); ++i) {
    if (!(u[i] > 0.0 && u[i] < 1.0)) throw ValidationError("hc_sample: u must lie in (0, 1)");
    const double s = sigmoid((std::log(u[i]) - std::log1p(-u[i]) + la[i]) / shape.beta);
    const double stretched = s * stretch + shape.gamma;
    z[i] = static_cast<T>(std::clamp(stretched, 0.0, 1.0));
    if (stretched > 0.0 && stretched < 1.0) (*dz)[i] = stretch * s * (1.0 - s) / shape.beta;
  }
  return log_alpha.tape->record("hc_sample", std::move(z), {log_alpha},
                                [ila = log_alpha.id, dz](Tape<T>& t, std::size_t self) {
                                  auto g = t.grad(self);
                                  auto gl = t.grad(ila);
                                  for (std::size_t i = 0; i < g.size(); ++i) {
                                    gl[i] += static_cast<T>(g[i] * (*dz)[i]);
                                  }
                                });
}

template <class T>
Var<T> hc_sample(Var<T> log_alpha, const HardConcreteShape& shape, Rng& rng) {
  std::vector<double> u(log_alpha.value().size());
  for (double& v : u) v = rng.uniform();
  return hc_sample(log_alpha, shape, std::span<const double>(u));
}

template <class T>
double hc_expected_l0(const BasicHardConcreteParams<T>& gates) {
  double total = 0;
  for (T la : gates.log_alpha.data()) total += hc_nonzero_probability(la, gates.shape);
  return total;
}

template <class T>
Var<T> hc_nonzero_probability(Var<T> log_alpha, const HardConcreteShape& shape) {
  const auto& la = log_alpha.value();
  const double offset = shape.l0_offset();
  BasicTensor<T> p(la.dims());
  for (std::size_t i = 0; i < la.size(); ++i) p[i] = static_cast<T>(sigmoid(la[i] - offset));
  return log_alpha.tape->record("hc_nonzero_probability", std::move(p), {log_alpha},
                                [ila = log_alpha.id, offset](Tape<T>& t, std::size_t self) {
                                  const auto& lav = t.value(ila);
                                  auto g = t.grad(self);
                                  auto gl = t.grad(ila);
                                  for (std::size_t i = 0; i < g.size(); ++i) {
                                    const double s = sigmoid(lav[i] - offset);
                                    gl[i] += static_cast<T>(g[i] * s * (1.0 - s));
                                  }
                                });
}

template <class T>
Var<T> hc_expected_l0(Var<T> log_alpha, const HardConcreteShape& shape) {
  return ops::sum(hc_nonzero_probability(log_alpha, shape));
}

template <class T>
BasicTensor<T> hc_test_gate(const BasicHardConcreteParams<T>& gates) {
  BasicTensor<T> z(gates.log_alpha.dims());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = static_cast<T>(hc_test_gate(gates.log_alpha[i], gates.shape));
  }
  return z;
}

template <class T>
SparsityMask hc_test_mask(const BasicHardConcreteParams<T>& gates) {
  SparsityMask mask(gates.log_alpha.size(), true);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (hc_test_gate(gates.log_alpha[i], gates.shape) == 0.0) mask.set(i, false);
  }
  return mask;
}

template <class T>
Var<T> l0_forward(const LinearGeometry& geometry, Var<T> input, Var<T> weights, Var<T> log_alpha,
                  const HardConcreteShape& shape, GateMode mode, Rng& rng) {
  if (weights.dims() != log_alpha.dims()) throw ValidationError("l0_forward: gate shape mismatch");
  Var<T> gate;
  if (mode == GateMode::Train) {
    gate = hc_sample(log_alpha, shape, rng);
  } else {
    BasicHardConcreteParams<T> params{log_alpha.value(), shape};
    gate = input.tape->constant(hc_test_gate(params));
  }
  return apply_linear(geometry, input, ops::mul(weights, gate));
}

template <class T>
Var<T> l0_weight_decay(Var<T> weights, Var<T> log_alpha, const HardConcreteShape& shape) {
  return ops::scale(ops::sum(ops::mul(hc_nonzero_probability(log_alpha, shape), ops::square(weights))),
                    0.5);
}

#define SPARSEKIT_INSTANTIATE(T)                                                                 \
  template BasicTensor<T> hc_sample<T>(const BasicHardConcreteParams<T>&, Rng&);                 \
  template Var<T> hc_sample<T>(Var<T>, const HardConcreteShape&, std::span<const double>);       \
  template Var<T> hc_sample<T>(Var<T>, const HardConcreteShape&, Rng&);                          \
  template double hc_expected_l0<T>(const BasicHardConcreteParams<T>&);                          \
  template Var<T> hc_nonzero_probability<T>(Var<T>, const HardConcreteShape&);                   \
  template Var<T> hc_expected_l0<T>(Var<T>, const HardConcreteShape&);                           \
  template BasicTensor<T> hc_test_gate<T>(const BasicHardConcreteParams<T>&);                    \
  template SparsityMask hc_test_mask<T>(const BasicHardConcreteParams<T>&);                      \
  template Var<T> l0_forward<T>(const LinearGeometry&, Var<T>, Var<T>, Var<T>,                   \
                                const HardConcreteShape&, GateMode, Rng&);                       \
  template Var<T> l0_weight_decay<T>(Var<T>, Var<T>, const HardConcreteShape&);

SPARSEKIT_INSTANTIATE(float)
SPARSEKIT_INSTANTIATE(double)
#undef SPARSEKIT_INSTANTIATE

}  // namespace sparsekit
