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

#include <algorithm>
#include <set>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "hinrep/rng.hpp"

using hinrep::fnv1a;
using hinrep::mix64;
using hinrep::Rng;

TEST_CASE("fnv1a matches published 64-bit test vectors") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("mix64 is the splitmix64 step") {
  // first three outputs of splitmix64 from state 0
  CHECK(mix64(0) == 0xe220a8397b1dcdafull);
  CHECK(mix64(0x9e3779b97f4a7c15ull) == 0x6e789e6aa1b965f4ull);
  CHECK(mix64(2 * 0x9e3779b97f4a7c15ull) == 0x06c45d188009454full);
  CHECK(mix64(1, 2) != mix64(2, 1));
}

TEST_CASE("same seed reproduces the stream, different seeds diverge") {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 256; ++i) {
    auto va = a.next_u64();
    all_equal = all_equal && va == b.next_u64();
    any_diff = any_diff || va != c.next_u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform stays in [0,1) with a sane mean") {
  Rng rng(7);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    double v = rng.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    sum += v;
  }
  CHECK_THAT(sum / 20000.0, Catch::Matchers::WithinAbs(0.5, 0.01));

  Rng rng2(8);
  for (int i = 0; i < 1000; ++i) {
    double v = rng2.uniform(-3.0, 5.0);
    REQUIRE(v >= -3.0);
    REQUIRE(v < 5.0);
  }
}

TEST_CASE("below is bounded and roughly uniform") {
  Rng rng(11);
  std::vector<int> buckets(8, 0);
  for (int i = 0; i < 8000; ++i) {
    std::uint64_t v = rng.below(8);
    REQUIRE(v < 8);
    buckets[static_cast<std::size_t>(v)]++;
  }
  for (int b : buckets) {
    CHECK(b > 800);
    CHECK(b < 1200);
  }
  CHECK_THROWS_AS(rng.below(0), hinrep::ConfigError);
}

TEST_CASE("normal draws have standard moments") {
  Rng rng(13);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK_THAT(mean, Catch::Matchers::WithinAbs(0.0, 0.03));
  CHECK_THAT(var, Catch::Matchers::WithinAbs(1.0, 0.05));
}

TEST_CASE("shuffle permutes without loss and is seed-deterministic") {
  std::vector<int> v(100);
  for (int i = 0; i < 100; ++i) v[static_cast<std::size_t>(i)] = i;
  std::vector<int> w = v;
  Rng a(5), b(5);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  CHECK(v != std::vector<int>(v.size()) /* not all zero */);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);

  std::vector<int> tiny = {42};
  a.shuffle(tiny);
  CHECK(tiny == std::vector<int>{42});
  std::vector<int> empty;
  a.shuffle(empty);
  CHECK(empty.empty());
}

TEST_CASE("sample_indices draws distinct in-range indices") {
  Rng rng(17);
  std::vector<int> s = rng.sample_indices(50, 10);
  CHECK(s.size() == 10);
  std::set<int> uniq(s.begin(), s.end());
  CHECK(uniq.size() == 10);
  for (int v : s) {
    CHECK(v >= 0);
    CHECK(v < 50);
  }

  SECTION("k == n yields a permutation") {
    std::vector<int> p = rng.sample_indices(20, 20);
    std::sort(p.begin(), p.end());
    for (int i = 0; i < 20; ++i) CHECK(p[static_cast<std::size_t>(i)] == i);
  }
  SECTION("k beyond n clamps") {
    CHECK(rng.sample_indices(5, 99).size() == 5);
  }
  SECTION("explicit pool restricts the domain") {
    std::vector<int> pool = {3, 9, 27, 81};
    std::vector<int> got = rng.sample_indices(0, 2, pool);
    CHECK(got.size() == 2);
    for (int v : got) CHECK(std::count(pool.begin(), pool.end(), v) == 1);
  }
  SECTION("deterministic under a fixed seed") {
    Rng r1(99), r2(99);
    CHECK(r1.sample_indices(30, 7) == r2.sample_indices(30, 7));
  }
}

TEST_CASE("substreams are reproducible and insensitive to parent draws") {
  Rng parent(1234);
  Rng s1 = parent.substream("alpha", 3);
  for (int i = 0; i < 17; ++i) parent.next_u64();  // advance the parent
  Rng s2 = parent.substream("alpha", 3);
  bool same = true;
  for (int i = 0; i < 64; ++i) same = same && s1.next_u64() == s2.next_u64();
  CHECK(same);

  CHECK(parent.substream("alpha", 3).next_u64() != parent.substream("alpha", 4).next_u64());
  CHECK(parent.substream("alpha", 3).next_u64() != parent.substream("beta", 3).next_u64());
  CHECK(Rng(1).substream("x", 0).next_u64() != Rng(2).substream("x", 0).next_u64());
}
