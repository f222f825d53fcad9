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

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <type_traits>
#include <vector>

namespace sparsekit {

// Counter-based generator: draw k of a stream is a pure function of
// (seed, k), so copying the state replays the exact noise sequence. The
// mixer is the SplitMix64 finalizer over seed + (k+1)*golden-gamma.
class Rng {
 public:
  Rng() = default;
  explicit Rng(std::uint64_t seed, std::uint64_t counter = 0) noexcept
      : seed_(seed), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix(seed_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform on the open interval (0, 1); never returns 0 or 1.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, n) by rejection, without modulo bias.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller; consumes two draws per call.
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Float targets take a float Box-Muller (24-bit uniforms, |z| < 5.8);
  // the double path is exact to double rounding.
  template <class T>
  void fill_normal(std::span<T> out) noexcept {
    std::size_t i = 0;
    if constexpr (std::is_same_v<T, float>) {
      constexpr float kTwoPi = 2.0f * std::numbers::pi_v<float>;
      for (; i + 1 < out.size(); i += 2) {
        const std::uint64_t x = next_u64();
        const float u1 = (static_cast<float>(x >> 40) + 0.5f) * 0x1.0p-24f;
        const float u2 = (static_cast<float>((x >> 8) & 0xffffff) + 0.5f) * 0x1.0p-24f;
        const float r = std::sqrt(-2.0f * std::log(u1));
        out[i] = r * std::cos(kTwoPi * u2);
        out[i + 1] = r * std::sin(kTwoPi * u2);
      }
    }
    for (; i + 1 < out.size(); i += 2) {
      const double u1 = uniform();
      const double u2 = uniform();
      const double r = std::sqrt(-2.0 * std::log(u1));
      out[i] = static_cast<T>(r * std::cos(2.0 * std::numbers::pi * u2));
      out[i + 1] = static_cast<T>(r * std::sin(2.0 * std::numbers::pi * u2));
    }
    if (i < out.size()) out[i] = static_cast<T>(normal());
  }

  template <class T>
  void fill_uniform(std::span<T> out, double lo = 0.0, double hi = 1.0) noexcept {
    for (auto& v : out) v = static_cast<T>(lo + (hi - lo) * uniform());
  }

  // Independent stream derived from this one's seed; does not advance *this.
  Rng substream(std::uint64_t key) const noexcept {
    return Rng(mix(seed_ ^ mix(key + 0x632be59bd9b4e019ULL)));
  }

  template <class I>
  void shuffle(std::vector<I>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace sparsekit
