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

#include "sparsekit/variational_dropout.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

namespace sparsekit {
namespace {

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double log_alpha_of(double theta, double log_sigma2) {
  return log_sigma2 - std::log(theta * theta + kVdEpsilon);
}

}  // namespace

double vd_negative_kl(double log_alpha) {
  using K = KLConstants;
  return K::k1 * sigmoid(K::k2 + K::k3 * log_alpha) - 0.5 * softplus(-log_alpha) - K::k1;
}

template <class T>
BasicTensor<T> vd_log_alpha(const BasicVDLayerParams<T>& layer) {
  if (layer.theta.dims() != layer.log_sigma2.dims()) {
    throw ValidationError("VD layer theta and log_sigma2 shapes differ");
  }
  BasicTensor<T> out(layer.theta.dims());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<T>(log_alpha_of(layer.theta[i], layer.log_sigma2[i]));
  }
  return out;
}

template <class T>
double vd_kl(const BasicVDLayerParams<T>& layer, double clip) {
  const BasicTensor<T> la = vd_log_alpha(layer);
  double total = 0;
  for (T v : la.data()) total += vd_kl_value(std::clamp<double>(v, -clip, clip));
  return total;
}

template <class T>
Var<T> vd_kl(Var<T> theta, Var<T> log_sigma2, double clip) {
  const auto& th = theta.value();
  const auto& ls = log_sigma2.value();
  if (th.dims() != ls.dims()) throw ValidationError("vd_kl: theta and log_sigma2 shapes differ");
  // Evaluated in T: this runs over every weight on every step, and float
  // transcendental calls are several times cheaper than double ones.
  const T k1 = static_cast<T>(KLConstants::k1), k2 = static_cast<T>(KLConstants::k2),
          k3 = static_cast<T>(KLConstants::k3), eps = static_cast<T>(kVdEpsilon);
  const T lo = static_cast<T>(std::max(-clip, -1e30)), hi = static_cast<T>(std::min(clip, 1e30));
  // d(KL)/d(log alpha) per weight, zero where clipped.
  auto dkl = std::make_shared<std::vector<T>>(th.size());
  double total = 0;
  for (std::size_t i = 0; i < th.size(); ++i) {
    const T raw = ls[i] - std::log(th[i] * th[i] + eps);
    const T la = std::clamp(raw, lo, hi);
    const T s1 = T{1} / (T{1} + std::exp(-(k2 + k3 * la)));
    // softplus(-la) and sigmoid(-la) share exp(-|la|).
    const T e = std::exp(-std::abs(la));
    const T softplus_neg = std::max(-la, T{0}) + std::log1p(e);
    const T sig_neg = la >= 0 ? e / (T{1} + e) : T{1} / (T{1} + e);
    total += static_cast<double>(k1 - k1 * s1 + T{0.5} * softplus_neg);
    if (raw > lo && raw < hi) (*dkl)[i] = -(k1 * k3 * s1 * (T{1} - s1) + T{0.5} * sig_neg);
  }
  BasicTensor<T> out({1}, static_cast<T>(total));
  return theta.tape->record(
      "vd_kl", std::move(out), {theta, log_sigma2},
      [ith = theta.id, ils = log_sigma2.id, dkl, eps](Tape<T>& t, std::size_t self) {
        const T g = t.grad(self)[0];
        if (t.requires_grad(ils)) {
          auto gs = t.grad(ils);
          for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += g * (*dkl)[i];
        }
        if (t.requires_grad(ith)) {
          const auto& thv = t.value(ith);
          auto gt = t.grad(ith);
          for (std::size_t i = 0; i < gt.size(); ++i) {
            const T w = thv[i];
            gt[i] += g * (*dkl)[i] * (T{-2} * w / (w * w + eps));
          }
        }
      });
}

template <class T>
Var<T> vd_forward_train(const LinearGeometry& geometry, Var<T> input, Var<T> theta,
                        Var<T> log_sigma2, Rng& rng) {
  if (theta.dims() != log_sigma2.dims()) {
    throw ValidationError("vd_forward_train: theta and log_sigma2 shapes differ");
  }
  Tape<T>& tape = *input.tape;
  Var<T> mean = apply_linear(geometry, input, theta);
  Var<T> variance = apply_linear(geometry, ops::square(input), ops::exp(log_sigma2));
  Var<T> stddev = ops::sqrt_eps(variance, kVdEpsilon);
  BasicTensor<T> noise(mean.dims());
  rng.fill_normal(noise.data());
  Var<T> eps = tape.constant(std::move(noise));
  return ops::add(mean, ops::mul(stddev, eps));
}

template <class T>
SparsityMask vd_prune(const BasicVDLayerParams<T>& layer, double threshold) {
  const BasicTensor<T> la = vd_log_alpha(layer);
  SparsityMask mask(la.size(), true);
  for (std::size_t i = 0; i < la.size(); ++i) {
    if (static_cast<double>(la[i]) > threshold) mask.set(i, false);
  }
  return mask;
}

template <class T>
Var<T> vd_forward_eval(Tape<T>& tape, const LinearGeometry& geometry,
                       const BasicVDLayerParams<T>& layer, const SparsityMask& mask,
                       Var<T> input) {
  if (mask.size() != layer.theta.size()) throw ValidationError("vd_forward_eval: mask size mismatch");
  BasicTensor<T> w = layer.theta;
  w.drop_grad();
  mask.apply(w.data());
  return apply_linear(geometry, input, tape.constant(std::move(w)));
}

#define SPARSEKIT_INSTANTIATE(T)                                                              \
  template BasicTensor<T> vd_log_alpha<T>(const BasicVDLayerParams<T>&);                      \
  template double vd_kl<T>(const BasicVDLayerParams<T>&, double);                             \
  template Var<T> vd_kl<T>(Var<T>, Var<T>, double);                                           \
  template Var<T> vd_forward_train<T>(const LinearGeometry&, Var<T>, Var<T>, Var<T>, Rng&);   \
  template SparsityMask vd_prune<T>(const BasicVDLayerParams<T>&, double);                    \
  template Var<T> vd_forward_eval<T>(Tape<T>&, const LinearGeometry&,                         \
                                     const BasicVDLayerParams<T>&, const SparsityMask&, Var<T>);

SPARSEKIT_INSTANTIATE(float)
SPARSEKIT_INSTANTIATE(double)
#undef SPARSEKIT_INSTANTIATE

}  // namespace sparsekit
