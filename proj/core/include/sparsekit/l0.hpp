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

#pragma once

#include <string_view>
#include <vector>

#include "sparsekit/linear.hpp"
#include "sparsekit/mask.hpp"
#include "sparsekit/rng.hpp"
#include "sparsekit/tape.hpp"

namespace sparsekit {

// Fixed shape of the stretched, clamped binary-concrete distribution.
struct HardConcreteShape {
  double beta = 2.0 / 3.0;  // temperature
  double gamma = -0.1;      // stretch lower end, < 0
  double zeta = 1.1;        // stretch upper end, > 1

  void validate() const;
  // beta * log(-gamma / zeta), the offset in the expected-L0 term.
  double l0_offset() const;
};

template <class T>
struct BasicHardConcreteParams {
  BasicTensor<T> log_alpha;
  HardConcreteShape shape;
};

// Effective weight = weights * gate.
template <class T>
struct BasicGatedLayer {
  BasicTensor<T> weights;
  BasicHardConcreteParams<T> gates;
};

using HardConcreteParams = BasicHardConcreteParams<float>;
using GatedLayer = BasicGatedLayer<float>;

enum class GateMode { Train, Eval };

// logit(1 - rate): the location whose keep probability matches a dropout rate.
double log_alpha_for_dropout_rate(double rate);

// Gate for one uniform draw u in (0, 1).
double hc_gate(double log_alpha, double u, const HardConcreteShape& shape);

// Deterministic test-time gate: clamp(sigmoid(log_alpha)*(zeta-gamma)+gamma, 0, 1).
double hc_test_gate(double log_alpha, const HardConcreteShape& shape);

// P(gate != 0) for one location.
double hc_nonzero_probability(double log_alpha, const HardConcreteShape& shape);

// Samples one gate per location, drawing u from rng.
template <class T>
BasicTensor<T> hc_sample(const BasicHardConcreteParams<T>& gates, Rng& rng);

// Differentiable sample with caller-supplied uniforms (pinned noise). The
// gradient is pathwise and zero where the clamp is active.
template <class T>
Var<T> hc_sample(Var<T> log_alpha, const HardConcreteShape& shape, std::span<const double> u);

template <class T>
Var<T> hc_sample(Var<T> log_alpha, const HardConcreteShape& shape, Rng& rng);

template <class T>
double hc_expected_l0(const BasicHardConcreteParams<T>& gates);

// Elementwise P(gate != 0) on the tape; summing it gives the expected L0.
template <class T>
Var<T> hc_nonzero_probability(Var<T> log_alpha, const HardConcreteShape& shape);

template <class T>
Var<T> hc_expected_l0(Var<T> log_alpha, const HardConcreteShape& shape);

template <class T>
BasicTensor<T> hc_test_gate(const BasicHardConcreteParams<T>& gates);

// Weights whose test-time gate is exactly zero count as pruned.
template <class T>
SparsityMask hc_test_mask(const BasicHardConcreteParams<T>& gates);

// Train: weights * sampled gates. Eval: weights * test-time gates.
template <class T>
Var<T> l0_forward(const LinearGeometry& geometry, Var<T> input, Var<T> weights, Var<T> log_alpha,
                  const HardConcreteShape& shape, GateMode mode, Rng& rng);

// Expected squared-norm penalty 0.5 * sum P(gate != 0) * w^2 used as weight
// decay on gated layers.
template <class T>
Var<T> l0_weight_decay(Var<T> weights, Var<T> log_alpha, const HardConcreteShape& shape);

// Multiplier that keeps the prior length scale when a layer starts at the
// given dropout rate.
inline double l0_weight_decay_scale(double initial_dropout_rate) { return 1.0 - initial_dropout_rate; }

}  // namespace sparsekit
