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

#include "sparsekit/data.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include "sparsekit/rng.hpp"

namespace sparsekit {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void need(const std::vector<unsigned char>& b, std::size_t bytes, const std::filesystem::path& p) {
  if (b.size() < bytes) {
    throw ValidationError(p.string() + ": truncated (" + std::to_string(b.size()) + " of " +
                          std::to_string(bytes) + " bytes)");
  }
}

}  // namespace

Shape Dataset::sample_dims() const {
  return Shape(images.dims().begin() + 1, images.dims().end());
}

void Dataset::validate() const {
  if (images.rank() != 4) throw ValidationError("dataset images must be [N x C x H x W]");
  if (images.dim(0) != labels.size()) throw ValidationError("dataset image/label count mismatch");
  for (std::int32_t l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw ValidationError("dataset label " + std::to_string(l) + " out of range");
    }
  }
}

Tensor Dataset::gather_images(const std::vector<std::size_t>& order, std::size_t first,
                              std::size_t count) const {
  const std::size_t per = images.size() / images.dim(0);
  Shape dims = images.dims();
  dims[0] = count;
  Tensor out(dims);
  for (std::size_t i = 0; i < count; ++i) {
    const float* src = images.raw() + order[first + i] * per;
    std::copy(src, src + per, out.raw() + i * per);
  }
  return out;
}

std::vector<std::int32_t> Dataset::gather_labels(const std::vector<std::size_t>& order,
                                                 std::size_t first, std::size_t count) const {
  std::vector<std::int32_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = labels[order[first + i]];
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  n = std::min(n, size());
  if (n == 0) throw ValidationError("dataset head needs at least one sample");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  return Dataset{gather_images(order, 0, n), gather_labels(order, 0, n), classes, split};
}

Dataset load_mnist_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path, std::string split) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  need(img, 16, images_path);
  need(lab, 8, labels_path);
  if (be32(img, 0) != kImageMagic) throw ValidationError(images_path.string() + ": bad IDX image magic");
  if (be32(lab, 0) != kLabelMagic) throw ValidationError(labels_path.string() + ": bad IDX label magic");
  const std::size_t n = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
  const std::size_t nl = be32(lab, 4);
  if (n != nl) {
    throw ValidationError("IDX count mismatch: " + std::to_string(n) + " images vs " +
                          std::to_string(nl) + " labels");
  }
  if (n == 0 || rows == 0 || cols == 0) throw ValidationError(images_path.string() + ": empty IDX file");
  need(img, 16 + n * rows * cols, images_path);
  need(lab, 8 + n, labels_path);

  Dataset d;
  d.images = Tensor({n, 1, rows, cols});
  for (std::size_t i = 0; i < n * rows * cols; ++i) d.images[i] = static_cast<float>(img[16 + i] / 255.0);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.labels[i] = lab[8 + i];
  d.classes = 10;
  d.split = std::move(split);
  d.validate();
  return d;
}

Dataset load_mnist(const std::filesystem::path& dir, const std::string& split) {
  std::string prefix;
  if (split == "train") {
    prefix = "train";
  } else if (split == "test") {
    prefix = "t10k";
  } else {
    throw ValidationError("MNIST split must be train or test, got '" + split + "'");
  }
  if (dir.empty()) throw ValidationError("no MNIST directory given (set SPARSEKIT_DATA)");
  return load_mnist_idx(dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte"),
                        split);
}

std::filesystem::path data_root(const std::string& explicit_path) {
  if (!explicit_path.empty()) return explicit_path;
  if (const char* env = std::getenv("SPARSEKIT_DATA"); env != nullptr) return env;
  return {};
}

bool mnist_available(const std::filesystem::path& dir) {
  if (dir.empty()) return false;
  for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                        "t10k-labels-idx1-ubyte"}) {
    if (!std::filesystem::exists(dir / f)) return false;
  }
  return true;
}

Dataset synthetic_classification(std::size_t n, std::size_t classes, std::uint64_t seed) {
  constexpr std::size_t kSide = 28, kPixels = kSide * kSide;
  // Block size B gives midpoint-hyperplane margin 0.5 * sqrt(B / 2) in the
  // worst case; B >= 8 keeps it >= 1.
  if (classes < 2 || classes > kPixels / 8) throw ValidationError("synthetic: classes must lie in [2, 98]");
  if (n < classes) throw ValidationError("synthetic: need n >= classes");
  const std::size_t block = kPixels / classes;
  Dataset d;
  d.images = Tensor({n, 1, kSide, kSide});
  d.labels.resize(n);
  d.classes = classes;
  d.split = "synthetic";
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    d.labels[i] = static_cast<std::int32_t>(c);
    float* px = d.images.raw() + i * kPixels;
    for (std::size_t p = 0; p < kPixels; ++p) {
      const double base = (p >= c * block && p < (c + 1) * block) ? 0.8 : 0.1;
      px[p] = static_cast<float>(base + std::clamp(0.05 * rng.normal(), -0.1, 0.1));
    }
  }
  return d;
}

}  // namespace sparsekit
