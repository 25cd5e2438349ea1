#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "genpred/conformal.hpp"
#include "genpred/random.hpp"

using namespace genpred;
using namespace genpred::conformal;

namespace {

// k-th smallest (1-based) by full sort, independent of the selection routine.
double order_statistic(std::vector<double> v, std::size_t k) {
  std::sort(v.begin(), v.end());
  return v[k - 1];
}

}  // namespace

TEST_CASE("nonconformity score examples", "[conformal]") {
  CHECK(nonconformity_score(5, 3, 7) == -2.0);
  CHECK(nonconformity_score(9, 3, 7) == 2.0);
  CHECK(nonconformity_score(3, 3, 7) == 0.0);
  CHECK(nonconformity_score(1, 3, 7) == 2.0);
  CHECK_THROWS_AS(nonconformity_score(5, 7, 3), DomainError);
  RandomSource rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double lo = rng.normal();
    const double hi = lo + rng.uniform(0.0, 2.0);
    const double y = rng.normal(0.0, 2.0);
    const double s = nonconformity_score(y, lo, hi);
    REQUIRE((s < 0.0) == (lo < y && y < hi));
  }
}

TEST_CASE("calibrate examples", "[conformal]") {
  SECTION("all points inside by a margin shrink the band") {
    std::vector<CalibrationPoint> pts;
    for (int i = 0; i < 20; ++i) pts.push_back({0.1 * i, 0.1 * i - 1.0 - 0.01 * i, 0.1 * i + 1.5});
    const auto cal = calibrate(pts, 0.1);
    CHECK(cal.qhat() <= -1.0);
    const auto out = conformalize({-2.0, 2.0, 0.9}, cal);
    CHECK(out.width() < 4.0);
  }
  SECTION("hand-built scores use the ceil((1 - alpha)(n + 1)) order statistic") {
    const std::vector<double> scores{2, -1, 6, 0, 7, 1, 4, 3, 5};
    const ConformalCalibration cal(0.2, scores);
    CHECK(cal.n() == 9);
    CHECK(cal.qhat() == order_statistic(scores, 8));
    CHECK(cal.qhat() == 6.0);
  }
  SECTION("single score at alpha 0.5") {
    for (double s : {-3.0, 0.0, 2.5}) CHECK(ConformalCalibration(0.5, {s}).qhat() == s);
  }
  SECTION("scores are stored in input order") {
    const std::vector<CalibrationPoint> pts{{9, 3, 7}, {5, 3, 7}, {3, 3, 7}};
    const auto cal = calibrate(pts, 0.5);
    CHECK(std::vector<double>(cal.scores().begin(), cal.scores().end()) ==
          std::vector<double>{2, -2, 0});
    CHECK(cal.score_digest() == score_digest(cal.scores()));
  }
  SECTION("invalid input") {
    CHECK_THROWS_AS(calibrate(std::vector<CalibrationPoint>{}, 0.1), DomainError);
    CHECK_THROWS_AS(ConformalCalibration(0.0, {1.0}), DomainError);
    CHECK_THROWS_AS(ConformalCalibration(1.0, {1.0}), DomainError);
  }
}

TEST_CASE("qhat agrees with a brute-force order statistic", "[conformal]") {
  RandomSource rng(12);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(60);
    const int thousandths = 1 + static_cast<int>(rng.uniform_index(998));
    const double alpha = thousandths / 1000.0;
    std::vector<double> scores(n);
    for (auto& s : scores) s = std::round(rng.normal() * 4.0) / 2.0;  // ties on purpose
    // ceil((1000 - k)(n + 1) / 1000) in integers, clamped to [1, n].
    const long long num = static_cast<long long>(1000 - thousandths) * static_cast<long long>(n + 1);
    long long k = (num + 999) / 1000;
    k = std::clamp<long long>(k, 1, static_cast<long long>(n));
    REQUIRE(ConformalCalibration(alpha, scores).qhat() ==
            order_statistic(scores, static_cast<std::size_t>(k)));
  }
}

TEST_CASE("conformalize examples", "[conformal]") {
  const PredictionInterval band{3, 7, 0.9};
  SECTION("qhat = 0 is the identity") {
    const auto cal = ConformalCalibration::from_record(0.1, 10, 0.0, 0);
    const auto out = conformalize(band, cal);
    CHECK(out.lower == 3.0);
    CHECK(out.upper == 7.0);
    CHECK_FALSE(collapsed(band, cal));
  }
  SECTION("positive inflation widens both sides") {
    const auto out = conformalize(band, ConformalCalibration::from_record(0.1, 10, 2.0, 0));
    CHECK(out.lower == 1.0);
    CHECK(out.upper == 9.0);
    CHECK(out.level == Catch::Approx(0.9));
  }
  SECTION("negative inflation past the half-width collapses to the midpoint") {
    const auto cal = ConformalCalibration::from_record(0.1, 10, -3.0, 0);
    const auto out = conformalize(band, cal);
    CHECK(out.lower == 5.0);
    CHECK(out.upper == 5.0);
    CHECK(collapsed(band, cal));
  }
  SECTION("identity property on random intervals") {
    RandomSource rng(4);
    const auto cal = ConformalCalibration::from_record(0.2, 3, 0.0, 0);
    for (int i = 0; i < 1000; ++i) {
      const double lo = rng.normal();
      const PredictionInterval iv{lo, lo + rng.uniform(), 0.8};
      const auto out = conformalize(iv, cal);
      REQUIRE(out.lower == iv.lower);
      REQUIRE(out.upper == iv.upper);
    }
  }
}

TEST_CASE("raising any calibration score never lowers qhat", "[conformal]") {
  RandomSource rng(8);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(40);
    const double alpha = rng.uniform(0.01, 0.99);
    std::vector<double> scores(n);
    for (auto& s : scores) s = rng.normal();
    const double before = ConformalCalibration(alpha, scores).qhat();
    scores[rng.uniform_index(n)] += rng.uniform(0.0, 3.0);
    REQUIRE(ConformalCalibration(alpha, scores).qhat() >= before);
  }
}

TEST_CASE("evaluate_coverage", "[conformal]") {
  SECTION("examples") {
    const std::vector<PredictionInterval> ivs{{0, 1, 0.9}, {2, 4, 0.9}, {1, 1, 0.9}};
    const auto all_in = evaluate_coverage(ivs, std::vector<double>{0.5, 2.0, 1.0});
    CHECK(all_in.coverage == 1.0);
    CHECK(all_in.mean_width == 1.0);
    const auto some = evaluate_coverage(ivs, std::vector<double>{1.5, 4.0, 1.0 + 1e-12});
    CHECK(some.coverage == Catch::Approx(1.0 / 3.0));
  }
  SECTION("errors") {
    const std::vector<PredictionInterval> ivs{{0, 1, 0.9}};
    CHECK_THROWS_AS(evaluate_coverage(ivs, std::vector<double>{1, 2}), DomainError);
    CHECK_THROWS_AS(evaluate_coverage({}, {}), DomainError);
  }
  SECTION("coverage is invariant under increasing affine maps") {
    RandomSource rng(6);
    std::vector<PredictionInterval> ivs;
    std::vector<double> ys;
    for (int i = 0; i < 500; ++i) {
      const double lo = std::round(rng.normal() * 8.0) / 8.0;
      ivs.push_back({lo, lo + std::round(rng.uniform() * 8.0) / 8.0, 0.9});
      ys.push_back(std::round(rng.normal() * 8.0) / 8.0);  // boundary ties included
    }
    const double base = evaluate_coverage(ivs, ys).coverage;
    for (const auto& [a, b] : {std::pair{2.0, 1.0}, {0.5, -3.0}, {4.0, 0.25}}) {
      auto mapped = ivs;
      auto my = ys;
      for (auto& iv : mapped) iv = {a * iv.lower + b, a * iv.upper + b, iv.level};
      for (auto& y : my) y = a * y + b;
      REQUIRE(evaluate_coverage(mapped, my).coverage == base);
    }
  }
}

TEST_CASE("calibration records round-trip", "[conformal][io]") {
  RandomSource rng(1);
  std::vector<double> scores(37);
  for (auto& s : scores) s = rng.normal() / 3.0;
  const ConformalCalibration cal(0.1, scores);
  std::stringstream buf;
  write_record(cal, buf);
  const auto back = read_record(buf);
  CHECK(back.alpha() == cal.alpha());
  CHECK(back.n() == cal.n());
  CHECK(back.qhat() == cal.qhat());
  CHECK(back.score_digest() == cal.score_digest());
  CHECK(back.scores().empty());

  std::stringstream no_header("alpha=0.1\nn=3\nqhat=1\nscore_digest=fnv1a64:00\n");
  CHECK_THROWS_AS(read_record(no_header), InputError);
  std::stringstream missing("# genpred conformal calibration v1\nalpha=0.1\nn=3\n");
  CHECK_THROWS_AS(read_record(missing), InputError);
  std::stringstream bad_n("# genpred conformal calibration v1\nalpha=0.1\nn=2.5\nqhat=1\n"
                          "score_digest=fnv1a64:00\n");
  CHECK_THROWS_AS(read_record(bad_n), InputError);
}

TEST_CASE("conformalized intervals reach nominal coverage under exchangeability", "[conformal][mc]") {
  // A deliberately too-narrow band [-0.5, 0.5] around N(0, 1) data. With
  // n = 99 calibration points at alpha = 0.1 the exact coverage is 90/100.
  const std::size_t n = 99;
  const double alpha = 0.1;
  const int reps = 20000;
  const PredictionInterval band{-0.5, 0.5, 0.9};
  const RandomSource root(2024);
  int hits = 0;
  std::vector<double> scores(n);
  for (int r = 0; r < reps; ++r) {
    RandomSource rng = root.substream(static_cast<std::uint64_t>(r));
    for (auto& s : scores) s = nonconformity_score(rng.normal(), band.lower, band.upper);
    const auto out = conformalize(band, ConformalCalibration(alpha, scores));
    if (out.contains(rng.normal())) ++hits;
  }
  const double coverage = static_cast<double>(hits) / reps;
  const double se = std::sqrt(0.9 * 0.1 / reps);
  CHECK(coverage >= 1.0 - alpha - 4.0 * se);
  CHECK(coverage <= 1.0 - alpha + 1.0 / (n + 1) + 4.0 * se);
}
