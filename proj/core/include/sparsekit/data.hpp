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
#include <filesystem>
#include <string>
#include <vector>

#include "sparsekit/tensor.hpp"

namespace sparsekit {

struct Dataset {
  Tensor images;                     // [N x C x H x W], values in [0, 1]
  std::vector<std::int32_t> labels;  // N entries, each < classes
  std::size_t classes = 10;
  std::string split;

  std::size_t size() const noexcept { return labels.size(); }
  Shape sample_dims() const;  // {C, H, W}
  void validate() const;

  // Copies the samples order[first .. first+count) into a batch tensor.
  Tensor gather_images(const std::vector<std::size_t>& order, std::size_t first,
                       std::size_t count) const;
  std::vector<std::int32_t> gather_labels(const std::vector<std::size_t>& order,
                                          std::size_t first, std::size_t count) const;
  // First n samples in file order.
  Dataset head(std::size_t n) const;
};

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// Pixels are scaled by 1/255.
Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path, std::string split = "");

// split is "train" or "test"; expects the canonical uncompressed file names.
Dataset load_mnist(const std::filesystem::path& dir, const std::string& split);

// Resolves the data root: explicit path, else $SPARSEKIT_DATA, else "".
std::filesystem::path data_root(const std::string& explicit_path = "");
bool mnist_available(const std::filesystem::path& dir);

// Stratified, deterministic, 1x28x28 samples. Class c lights a private pixel
// block; bounded noise keeps every pair of classes linearly separable with
// geometric margin >= 1.
Dataset synthetic_classification(std::size_t n, std::size_t classes, std::uint64_t seed);

}  // namespace sparsekit
