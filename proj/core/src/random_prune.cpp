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

#include "sparsekit/random_prune.hpp"

#include <vector>

#include "sparsekit/schedule.hpp"

namespace sparsekit {

void random_grow_mask(SparsityMask& mask, std::size_t wanted, Rng& rng) {
  const std::size_t n = mask.size();
  const std::size_t current = mask.count_masked();
  if (wanted > n) throw ValidationError("random prune: more zeros requested than weights");
  if (wanted < current) {
    throw ValidationError("random prune target of " + std::to_string(wanted) +
                          " zeros is below the current " + std::to_string(current));
  }
  const std::size_t extra = wanted - current;
  if (extra == 0) return;

  std::vector<std::size_t> kept;
  kept.reserve(n - current);
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.kept(i)) kept.push_back(i);
  }
  // Partial Fisher-Yates: the first `extra` slots become a uniform sample.
  for (std::size_t i = 0; i < extra; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(kept.size() - i));
    std::swap(kept[i], kept[j]);
    mask.set(kept[i], false);
  }
}

template <class T>
void random_prune_step(BasicMaskedLayer<T>& layer, double target, Rng& rng) {
  if (!(target >= 0.0 && target <= 1.0)) {
    throw ValidationError("random prune target must lie in [0, 1]");
  }
  const std::size_t n = layer.weights.size();
  if (layer.mask.size() != n) layer.mask = SparsityMask(n, true);
  const std::size_t wanted = zeros_for_fraction(target, n);
  if (wanted < layer.mask.count_masked()) {
    throw ValidationError("random prune target " + std::to_string(target) +
                          " is below the current sparsity " + std::to_string(layer.mask.sparsity()));
  }
  layer.target_sparsity = target;
  random_grow_mask(layer.mask, wanted, rng);
}

template void random_prune_step<float>(BasicMaskedLayer<float>&, double, Rng&);
template void random_prune_step<double>(BasicMaskedLayer<double>&, double, Rng&);

}  // namespace sparsekit
