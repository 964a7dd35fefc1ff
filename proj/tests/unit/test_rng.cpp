#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "mmbs/rng.hpp"
#include "oracles.hpp"

using mmbs::Rng;

TEST_CASE("splitmix64 reference outputs") {
  // First outputs of SplitMix64 seeded with 0, as published with the generator.
  Rng r(0);
  CHECK(r.next() == 0xe220a8397b1dcdafULL);
  CHECK(r.next() == 0x6e789e6aa1b965f4ULL);
  CHECK(r.next() == 0x06c45d188009454fULL);
}

TEST_CASE("keyed streams are reproducible and distinct") {
  auto a = Rng::stream(7, {Rng::key("noise"), Rng::key("train")});
  auto b = Rng::stream(7, {Rng::key("noise"), Rng::key("train")});
  auto c = Rng::stream(7, {Rng::key("noise"), Rng::key("test")});
  auto d = Rng::stream(8, {Rng::key("noise"), Rng::key("train")});
  const auto x = a.next();
  CHECK(x == b.next());
  CHECK(x != c.next());
  CHECK(x != d.next());
  CHECK(Rng::key("order") != Rng::key("question-shuffle"));
}

TEST_CASE("bounded draws stay in range and cover it") {
  Rng r(3);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = r.index(7);
    REQUIRE(v < 7);
    ++seen[v];
  }
  for (int c : seen) CHECK(c > 800);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("normal draws have unit moments") {
  Rng r(11);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("shuffle matches an independent Fisher-Yates and is a permutation") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::vector<int> v(1 + seed % 13);
    std::iota(v.begin(), v.end(), 0);
    Rng r(seed * 977);
    auto mine = v;
    r.shuffle(std::span(mine));
    CHECK(mine == oracle::fisher_yates(v, seed * 977));
    std::sort(mine.begin(), mine.end());
    CHECK(mine == v);
  }
}
