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

#include <limits>

#include "sparsekit/linear.hpp"
#include "sparsekit/mask.hpp"
#include "sparsekit/rng.hpp"
#include "sparsekit/tape.hpp"

namespace sparsekit {

// Constants of the sigmoid approximation to the KL divergence between the
// factorized Gaussian posterior and the log-uniform prior.
struct KLConstants {
  static constexpr double k1 = 0.63576;
  static constexpr double k2 = 1.87320;
  static constexpr double k3 = 1.48695;
};

// Guards sqrt(delta) and log(theta^2) at zero.
inline constexpr double kVdEpsilon = 1e-8;
inline constexpr double kNoClip = std::numeric_limits<double>::infinity();

// Posterior N(theta, sigma^2) per weight, parameterized by theta and
// log sigma^2 (additive noise reparameterization: sigma^2 = alpha * theta^2).
template <class T>
struct BasicVDLayerParams {
  BasicTensor<T> theta;
  BasicTensor<T> log_sigma2;

  BasicVDLayerParams() = default;
  BasicVDLayerParams(BasicTensor<T> th, double log_sigma2_init)
      : theta(std::move(th)), log_sigma2(theta.dims(), static_cast<T>(log_sigma2_init)) {}
};

using VDLayerParams = BasicVDLayerParams<float>;

// -KL ~= k1*sigmoid(k2 + k3*log_alpha) - 0.5*log(1 + 1/alpha) - k1.
double vd_negative_kl(double log_alpha);
inline double vd_kl_value(double log_alpha) { return -vd_negative_kl(log_alpha); }

// log sigma^2 - log(theta^2 + eps), elementwise.
template <class T>
BasicTensor<T> vd_log_alpha(const BasicVDLayerParams<T>& layer);

// Sum of per-weight KL terms, log alpha optionally clipped to [-clip, clip].
template <class T>
double vd_kl(const BasicVDLayerParams<T>& layer, double clip = kNoClip);

// Differentiable KL sum w.r.t. theta and log sigma^2. Clipped entries get no
// gradient.
template <class T>
Var<T> vd_kl(Var<T> theta, Var<T> log_sigma2, double clip = kNoClip);

// Local reparameterization: gamma = A*theta, delta = A^2*sigma^2, output
// gamma + sqrt(delta + eps) * noise with one standard-normal draw per
// activation from rng.
template <class T>
Var<T> vd_forward_train(const LinearGeometry& geometry, Var<T> input, Var<T> theta,
                        Var<T> log_sigma2, Rng& rng);

// Keeps weights with log alpha <= threshold.
template <class T>
SparsityMask vd_prune(const BasicVDLayerParams<T>& layer, double threshold = 3.0);

// Deterministic forward with theta * mask.
template <class T>
Var<T> vd_forward_eval(Tape<T>& tape, const LinearGeometry& geometry,
                       const BasicVDLayerParams<T>& layer, const SparsityMask& mask,
                       Var<T> input);

}  // namespace sparsekit
