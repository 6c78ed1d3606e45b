#include <doctest.h>

#include <set>
#include <vector>

#include "cashlab/random.hpp"

using namespace cashlab;

TEST_CASE("derive_seed separates streams and indices") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t stream = 1; stream <= 7; ++stream) {
    for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, stream, i));
  }
  CHECK(seen.size() == 7000);
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
}

TEST_CASE("SplitMix64 is reproducible") {
  SplitMix64 a(7);
  SplitMix64 b(7);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
}

TEST_CASE("uniform stays in [0,1) with mean near 1/2") {
  SplitMix64 rng(11);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.005));
}

TEST_CASE("below covers its range evenly") {
  SplitMix64 rng(3);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto v = rng.below(7);
    REQUIRE(v < 7);
    ++counts[v];
  }
  for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.05));
  CHECK(rng.below(1) == 0);
}

TEST_CASE("fnv1a matches the reference vector") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}
