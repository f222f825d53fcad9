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

#include "sparsekit/ops.hpp"

namespace sparsekit {

// The weight-bearing map shared by every sparsification method: a dense
// matmul (weights [in x out]) or a convolution (weights [F x C x kH x kW]).
struct LinearGeometry {
  enum class Kind { Dense, Conv };
  Kind kind = Kind::Dense;
  ops::Conv2dGeometry conv{};

  static LinearGeometry dense() { return {}; }
  static LinearGeometry convolution(std::size_t stride = 1, std::size_t padding = 0) {
    return {Kind::Conv, {stride, padding}};
  }
};

template <class T>
Var<T> apply_linear(const LinearGeometry& g, Var<T> input, Var<T> weights) {
  return g.kind == LinearGeometry::Kind::Dense ? ops::matmul(input, weights)
                                               : ops::conv2d(input, weights, g.conv);
}

}  // namespace sparsekit
