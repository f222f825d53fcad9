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

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sparsekit/tensor.hpp"

namespace sparsekit {

// One bit per weight; a set bit keeps the weight.
class SparsityMask {
 public:
  SparsityMask() = default;
  explicit SparsityMask(std::size_t n, bool keep = true)
      : size_(n), words_((n + 63) / 64, keep ? ~std::uint64_t{0} : 0) {
    trim();
  }

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  bool kept(std::size_t i) const noexcept { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool keep) noexcept {
    const std::uint64_t bit = std::uint64_t{1} << (i & 63);
    if (keep) {
      words_[i >> 6] |= bit;
    } else {
      words_[i >> 6] &= ~bit;
    }
  }
  void fill(bool keep) {
    std::fill(words_.begin(), words_.end(), keep ? ~std::uint64_t{0} : 0);
    trim();
  }

  std::size_t count_kept() const noexcept {
    std::size_t c = 0;
    for (std::uint64_t w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }
  std::size_t count_masked() const noexcept { return size_ - count_kept(); }
  double sparsity() const noexcept {
    return size_ == 0 ? 0.0 : static_cast<double>(count_masked()) / static_cast<double>(size_);
  }

  // True when every bit masked here is also masked in other.
  bool masked_subset_of(const SparsityMask& other) const noexcept {
    if (other.size_ != size_) return false;
    for (std::size_t w = 0; w < words_.size(); ++w) {
      if (~words_[w] & other.words_[w] & valid_bits(w)) return false;
    }
    return true;
  }

  // LSB-first byte packing: weight i lives in byte i/8, bit i%8.
  std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> out((size_ + 7) / 8, 0);
    for (std::size_t b = 0; b < out.size(); ++b) {
      out[b] = static_cast<std::uint8_t>(words_[b >> 3] >> ((b & 7) * 8));
    }
    return out;
  }

  static SparsityMask from_bytes(std::span<const std::uint8_t> bytes, std::size_t n) {
    if (bytes.size() != (n + 7) / 8) {
      throw ValidationError("mask byte length does not match weight count");
    }
    SparsityMask m(n, false);
    for (std::size_t b = 0; b < bytes.size(); ++b) {
      m.words_[b >> 3] |= static_cast<std::uint64_t>(bytes[b]) << ((b & 7) * 8);
    }
    m.trim();
    return m;
  }

  template <class T>
  void apply(std::span<T> values) const noexcept {
    for (std::size_t i = 0; i < size_; ++i) {
      if (!kept(i)) values[i] = T{0};
    }
  }

  friend bool operator==(const SparsityMask&, const SparsityMask&) = default;

 private:
  std::uint64_t valid_bits(std::size_t word) const noexcept {
    const std::size_t rem = size_ - word * 64;
    return rem >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << rem) - 1);
  }
  void trim() noexcept {
    if (!words_.empty()) words_.back() &= valid_bits(words_.size() - 1);
  }

  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace sparsekit
