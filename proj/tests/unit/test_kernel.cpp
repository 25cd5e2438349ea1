#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "genpred/errors.hpp"
#include "genpred/kernel.hpp"
#include "genpred/random.hpp"

using namespace genpred;
using namespace genpred::kernel;

namespace {

Dataset uniform_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  RandomSource rng(seed);
  Dataset data(n, d);
  for (auto& v : data.features) v = rng.uniform(-1.0, 1.0);
  for (auto& y : data.targets) y = rng.normal();
  return data;
}

// Log-domain weights in long double; an independent path for small bandwidths.
double brute_force_estimate(const Dataset& train, std::span<const double> x, double sigma) {
  std::vector<long double> logk(train.rows);
  for (std::size_t i = 0; i < train.rows; ++i) {
    long double d2 = 0.0L;
    for (std::size_t j = 0; j < train.cols; ++j) {
      const long double d = static_cast<long double>(x[j]) - train.features[i * train.cols + j];
      d2 += d * d;
    }
    logk[i] = -d2 / (2.0L * sigma * sigma);
  }
  const long double top = *std::max_element(logk.begin(), logk.end());
  long double num = 0.0L, den = 0.0L;
  for (std::size_t i = 0; i < train.rows; ++i) {
    const long double w = std::exp(logk[i] - top);
    num += w * train.targets[i];
    den += w;
  }
  return static_cast<double>(num / den);
}

}  // namespace

TEST_CASE("Gaussian kernel examples", "[kernel]") {
  const KernelConfig cfg{0.5, KernelForm::radial};
  const std::vector<double> a{0.3, -1.2}, b{0.3, -1.2};
  CHECK(gaussian_kernel(a, b, cfg) == 1.0);
  const std::vector<double> c{0.3 + 0.5 * std::sqrt(2.0), -1.2};
  CHECK(gaussian_kernel(a, c, cfg) == Catch::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK_THROWS_AS(gaussian_kernel(a, std::vector<double>{1.0}, cfg), DomainError);
  CHECK_THROWS_AS(gaussian_kernel(a, b, {0.0, KernelForm::radial}), DomainError);

  RandomSource rng(1);
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
    const std::vector<double> y{rng.normal(), rng.normal(), rng.normal()};
    REQUIRE(gaussian_kernel(x, y, cfg) == gaussian_kernel(y, x, cfg));
    const double k = gaussian_kernel(x, y, cfg);
    REQUIRE(k >= 0.0);
    REQUIRE(k <= 1.0);
  }
}

TEST_CASE("inner-product kernel form", "[kernel]") {
  const KernelConfig cfg{1.0, KernelForm::inner_product};
  const std::vector<double> x{1.0, 2.0}, y{0.5, -1.0};
  CHECK(gaussian_kernel(x, y, cfg) == Catch::Approx(std::exp(-1.5 / 2.0)).epsilon(1e-14));
  CHECK(gaussian_kernel(x, x, cfg) == Catch::Approx(std::exp(2.5)).epsilon(1e-14));
  CHECK(gaussian_kernel(x, y, cfg) == gaussian_kernel(y, x, cfg));
}

TEST_CASE("Nadaraya-Watson examples", "[kernel][nw]") {
  SECTION("single training point returns its target") {
    const Dataset one(2, {0.2, 0.4}, {3.5});
    RandomSource rng(2);
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> q{rng.normal(), rng.normal()};
      REQUIRE(nw_estimate(one, q, {0.7, KernelForm::radial}) == 3.5);
    }
  }
  SECTION("large bandwidth gives the target mean") {
    const Dataset data = uniform_rows(50, 2, 3);
    const double mean = std::accumulate(data.targets.begin(), data.targets.end(), 0.0) / 50.0;
    CHECK(std::abs(nw_estimate(data, std::vector<double>{0.1, 0.9}, {1e6, KernelForm::radial}) -
                   mean) < 1e-6);
  }
  SECTION("small bandwidth at a training point gives its target") {
    Dataset data(10, 1);
    RandomSource rng(4);
    for (std::size_t i = 0; i < 10; ++i) {
      data.features[i] = 0.1 * static_cast<double>(i);
      data.targets[i] = rng.normal();
    }
    for (std::size_t i = 0; i < 10; ++i) {
      const std::vector<double> q{data.features[i]};
      const double got = nw_estimate(data, q, {1e-3, KernelForm::radial});
      REQUIRE(got == Catch::Approx(brute_force_estimate(data, q, 1e-3)).margin(1e-12));
      REQUIRE(got == Catch::Approx(data.targets[i]).margin(1e-12));
    }
  }
  SECTION("moderate bandwidths agree with the log-domain oracle") {
    const Dataset data = uniform_rows(80, 3, 5);
    RandomSource rng(6);
    for (double sigma : {0.05, 0.2, 1.0, 5.0}) {
      for (int i = 0; i < 50; ++i) {
        const std::vector<double> q{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        REQUIRE(nw_estimate(data, q, {sigma, KernelForm::radial}) ==
                Catch::Approx(brute_force_estimate(data, q, sigma)).epsilon(1e-10).margin(1e-12));
      }
    }
  }
  SECTION("errors") {
    const Dataset data = uniform_rows(5, 2, 7);
    CHECK_THROWS_AS(nw_estimate(data, std::vector<double>{1.0}, {}), DomainError);
    CHECK_THROWS_AS(nw_estimate(Dataset(0, 2), std::vector<double>{1.0, 2.0}, {}), DomainError);
    CHECK_THROWS_AS(nw_predict(data, std::vector<double>{1.0, 2.0, 3.0}, {}), DomainError);
  }
}

TEST_CASE("weights are a probability vector", "[kernel][nw]") {
  RandomSource rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const Dataset data = uniform_rows(1 + rng.uniform_index(100), 2, 100 + trial);
    const std::vector<double> q{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto w = nw_weights(data, q, {0.05 + rng.uniform(), KernelForm::radial});
    REQUIRE_FALSE(w.underflow_fallback);
    double sum = 0.0;
    for (double v : w.weights) {
      REQUIRE(v >= 0.0);
      sum += v;
    }
    REQUIRE(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("estimate does not depend on row order", "[kernel][nw]") {
  RandomSource rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Dataset data = uniform_rows(60, 2, 200 + trial);
    std::vector<std::size_t> perm(data.rows);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    const Dataset shuffled = data.subset(perm);
    const std::vector<double> q{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const KernelConfig cfg{0.3, KernelForm::radial};
    REQUIRE(nw_estimate(shuffled, q, cfg) ==
            Catch::Approx(nw_estimate(data, q, cfg)).epsilon(1e-12).margin(1e-14));
  }
}

TEST_CASE("duplicating a row pulls the estimate toward its target", "[kernel][nw]") {
  RandomSource rng(10);
  for (int trial = 0; trial < 500; ++trial) {
    const Dataset data = uniform_rows(20, 1, 300 + trial);
    const std::vector<double> q{rng.uniform(-1, 1)};
    const KernelConfig cfg{0.1 + rng.uniform(), KernelForm::radial};
    const double before = nw_estimate(data, q, cfg);
    const std::size_t j = rng.uniform_index(data.rows);
    const double yj = data.targets[j];
    std::vector<std::size_t> rows(data.rows);
    std::iota(rows.begin(), rows.end(), 0);
    rows.push_back(j);
    const double after = nw_estimate(data.subset(rows), q, cfg);
    REQUIRE(std::abs(after - yj) <= std::abs(before - yj) + 1e-12);
  }
}

TEST_CASE("underflow falls back to the nearest row", "[kernel][nw]") {
  const Dataset data(1, {0.0, 1.0, 5.0}, {10.0, 20.0, 30.0});
  const KernelConfig cfg{1e-3, KernelForm::radial};
  const std::vector<double> q{3.4};
  const auto w = nw_weights(data, q, cfg);
  CHECK(w.underflow_fallback);
  CHECK(w.nearest == 2);
  CHECK(nw_estimate(data, q, cfg) == 30.0);
  CHECK(nw_estimate(data, std::vector<double>{1.9}, cfg) == 20.0);
}

TEST_CASE("nw_predict matches per-row estimates", "[kernel][nw]") {
  const Dataset data = uniform_rows(120, 2, 11);
  RandomSource rng(12);
  std::vector<double> queries(2 * 40);
  for (auto& v : queries) v = rng.uniform(-1, 1);
  const KernelConfig cfg{0.25, KernelForm::radial};
  const auto serial = nw_predict(data, queries, cfg, Execution::serial);
  const auto parallel = nw_predict(data, queries, cfg, Execution::parallel);
  REQUIRE(serial.size() == 40);
  CHECK(serial == parallel);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(serial[i] == nw_estimate(data, std::span<const double>(queries).subspan(2 * i, 2), cfg));
  }
}
