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

#include "sparsekit/magnitude.hpp"
#include "sparsekit/rng.hpp"

namespace sparsekit {

// Baseline pruner. Grows the masked set to floor(target * n) by drawing
// uniformly from the currently kept weights; masked bits are never cleared
// and the choice never looks at weight values. Throws ValidationError when
// target is below the current sparsity.
// Mask-level form: masks uniformly chosen kept bits until `wanted` are masked.
void random_grow_mask(SparsityMask& mask, std::size_t wanted, Rng& rng);

template <class T>
void random_prune_step(BasicMaskedLayer<T>& layer, double target, Rng& rng);

}  // namespace sparsekit
