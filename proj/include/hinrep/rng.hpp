/*
 * Copyright 2026 the hinrep authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "hinrep/errors.hpp"

#include <random>

namespace hinrep {

// 64-bit FNV-1a. Used for stream splitting and id-derived fallback features.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t mix64(std::uint64_t z) {
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) { return mix64(mix64(a) ^ b); }

// Deterministic RNG. The engine sequence is pinned by the C++ standard;
// all transforms below are hand-rolled so results are identical across
// platforms and standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(mix64(seed)), seed_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), unbiased via rejection
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ConfigError("Rng::below: n must be positive");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  int uniform_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  double normal() {
    // Box-Muller; one value per call keeps the stream position predictable
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates, descending index
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // First k of a partial Fisher-Yates pass over 0..n-1, in selection order.
  std::vector<int> sample_indices(int n, int k, std::vector<int> pool = {}) {
    if (pool.empty()) {
      pool.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    }
    if (k > static_cast<int>(pool.size())) k = static_cast<int>(pool.size());
    for (int i = 0; i < k; ++i) {
      std::size_t j = static_cast<std::size_t>(i) +
                      static_cast<std::size_t>(below(pool.size() - static_cast<std::size_t>(i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
  }

  // Independent child stream derived from the construction seed, not from
  // engine state, so sibling streams never interact.
  Rng substream(std::string_view tag, std::uint64_t index) const {
    return Rng(mix64(seed_, mix64(fnv1a(tag), index)));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::mt19937_64 eng_;
  std::uint64_t seed_;
};

}  // namespace hinrep
