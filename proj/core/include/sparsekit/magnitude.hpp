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

#include "sparsekit/linear.hpp"
#include "sparsekit/mask.hpp"
#include "sparsekit/tape.hpp"

namespace sparsekit {

// How the loss gradient reaches weights hidden by a mask.
//   Dense:  straight-through; masked weights keep training and can regrow.
//   Masked: true derivative of w * m; masked weights receive zero.
enum class GradMode { Dense, Masked };

GradMode parse_grad_mode(std::string_view name);
std::string_view to_string(GradMode mode);

template <class T>
struct BasicMaskedLayer {
  BasicTensor<T> weights;
  SparsityMask mask;
  double target_sparsity = 0.0;

  BasicMaskedLayer() = default;
  explicit BasicMaskedLayer(BasicTensor<T> w)
      : weights(std::move(w)), mask(weights.size(), true) {}
};

using MaskedLayer = BasicMaskedLayer<float>;

// Masks exactly floor(target * n) weights: the smallest |w| over all
// underlying weights, masked ones included, so a masked weight that grew
// can re-enter the kept set. Ties go to the lowest flat index.
template <class T>
void magnitude_prune_step(BasicMaskedLayer<T>& layer, double target);

// Mask-level selection over a flat weight view.
template <class T>
void magnitude_select(std::span<const T> weights, SparsityMask& mask, std::size_t zeros);

// Same selection, driven by an explicit zero count.
template <class T>
void magnitude_prune_count(BasicMaskedLayer<T>& layer, std::size_t zeros);

// Records w * m on the tape with w as a parameter leaf.
template <class T>
Var<T> masked_weights(Tape<T>& tape, BasicTensor<T>& weights, const SparsityMask& mask,
                      GradMode mode);

template <class T>
Var<T> masked_forward(Tape<T>& tape, BasicMaskedLayer<T>& layer, const LinearGeometry& geometry,
                      Var<T> input, GradMode mode = GradMode::Dense);

// Post-backward gradient contract. Dense leaves the straight-through gradient
// in place; Masked zeroes the grad of every masked weight.
template <class T>
void route_gradients(BasicTensor<T>& weights, const SparsityMask& mask, GradMode mode);

template <class T>
void route_gradients(BasicMaskedLayer<T>& layer, GradMode mode) {
  route_gradients(layer.weights, layer.mask, mode);
}

}  // namespace sparsekit
