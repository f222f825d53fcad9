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

#include <cstdint>
#include <span>
#include <vector>

#include "sparsekit/tape.hpp"
#include "sparsekit/tensor.hpp"

// Differentiable primitives. Every op validates shapes, records its backward
// rule on the input's tape and rejects non-finite inputs/outputs.
namespace sparsekit::ops {

struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// [m x k] * [k x n] -> [m x n].
template <class T>
Var<T> matmul(Var<T> a, Var<T> b);

// Cross-correlation, input [N x C x H x W], kernel [F x C x kH x kW].
template <class T>
Var<T> conv2d(Var<T> input, Var<T> kernel, Conv2dGeometry geom = {});

// Non-overlapping max pooling with a square window.
template <class T>
Var<T> maxpool2d(Var<T> input, std::size_t window = 2);

// x [m x n] + bias [n] broadcast over rows.
template <class T>
Var<T> add_row_bias(Var<T> x, Var<T> bias);

// x [N x C x H x W] + bias [C] broadcast over batch and space.
template <class T>
Var<T> add_channel_bias(Var<T> x, Var<T> bias);

// [N x ...] -> [N x prod(...)]
template <class T>
Var<T> flatten(Var<T> x);

template <class T>
Var<T> relu(Var<T> x);

template <class T>
Var<T> square(Var<T> x);

template <class T>
Var<T> exp(Var<T> x);

// sqrt(x + eps) elementwise.
template <class T>
Var<T> sqrt_eps(Var<T> x, double eps);

template <class T>
Var<T> add(Var<T> a, Var<T> b);

template <class T>
Var<T> mul(Var<T> a, Var<T> b);

template <class T>
Var<T> scale(Var<T> x, double factor);

// Sum of all elements, accumulated in double; returns shape [1].
template <class T>
Var<T> sum(Var<T> x);

// Mean softmax cross-entropy of logits [N x C] against integer labels.
template <class T>
Var<T> softmax_cross_entropy(Var<T> logits, std::span<const std::int32_t> labels);

// Non-differentiable helpers.

// Row-major C = op(A) * op(B) (+ beta*C), dispatched to BLAS.
template <class T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          T alpha, const T* a, const T* b, T beta, T* c);

// Count of rows whose argmax equals the label.
template <class T>
std::size_t count_correct(const BasicTensor<T>& logits, std::span<const std::int32_t> labels);

}  // namespace sparsekit::ops
