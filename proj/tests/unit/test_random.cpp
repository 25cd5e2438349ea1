#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "genpred/random.hpp"

using namespace genpred;

TEST_CASE("published reference values for the building blocks", "[random]") {
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);

  RandomSource rng(5489);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = rng.next_u64();
  CHECK(x == 9981545732273789042ULL);
}

TEST_CASE("identical seeds give identical streams", "[random]") {
  RandomSource a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 1000; ++i) {
    const double va = a.normal();
    REQUIRE(va == b.normal());
    differs |= va != c.normal();
  }
  CHECK(differs);
}

TEST_CASE("sub-streams are deterministic and distinct", "[random]") {
  const RandomSource root(9);
  RandomSource t1 = root.substream(streams::kTraining);
  RandomSource t2 = root.substream(streams::kTraining);
  RandomSource cal = root.substream(streams::kCalibration);
  CHECK(t1.next_u64() == t2.next_u64());
  CHECK(t1.next_u64() != cal.next_u64());

  std::set<std::uint64_t> seeds;
  for (std::uint64_t id = 0; id < 10000; ++id) seeds.insert(root.substream(id).seed());
  CHECK(seeds.size() == 10000);

  // A child does not advance its parent.
  RandomSource parent(9);
  const auto child = parent.substream(3);
  (void)child;
  RandomSource fresh(9);
  CHECK(parent.next_u64() == fresh.next_u64());
}

TEST_CASE("uniform draws stay in range", "[random]") {
  RandomSource rng(1);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const double o = rng.uniform_open();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    REQUIRE(o > 0.0);
    REQUIRE(o < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo < 1e-4);
  CHECK(hi > 1.0 - 1e-4);
  CHECK(std::abs(sum / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-2.0, 3.0);
    REQUIRE(v >= -2.0);
    REQUIRE(v < 3.0);
  }
}

TEST_CASE("normal draws have unit moments", "[random]") {
  RandomSource rng(77);
  const int n = 400000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  CHECK(std::abs(s1 / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
  RandomSource a(5), b(5);
  CHECK(a.normal(3.0, 2.0) == 3.0 + 2.0 * b.normal());
}

TEST_CASE("uniform_index covers every residue evenly", "[random]") {
  RandomSource rng(8);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = rng.uniform_index(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  // Chi-square with 6 degrees of freedom; 22.46 is the 0.999 quantile.
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
  CHECK(chi2 < 22.46);
  CHECK(rng.uniform_index(1) == 0);
  CHECK(rng.uniform_index(0) == 0);
}

TEST_CASE("shuffle permutes", "[random]") {
  RandomSource rng(11);
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(std::span<int>(w));
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
}
