#include "genpred/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace genpred {

namespace {

constexpr double kInvSqrtPi = 0.56418958354775628695;  // 1/sqrt(pi)
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kSqrt1_2 = 0.70710678118654752440;
constexpr double kSeriesLimit = 1.0;

// exp(-x*x) with x split as hi + lo so the square is formed without rounding
// loss in the exponent (matters for x in the far tail).
double exp_neg_square(double x) {
  const double hi = std::trunc(x * 16.0) / 16.0;
  const double lo = x - hi;
  return std::exp(-hi * hi) * std::exp(-lo * (x + hi));
}

// erf(x) for 0 <= x < 1:
//   erf(x) = 2/sqrt(pi) exp(-x^2) sum_n 2^n x^(2n+1) / (1*3*...*(2n+1))
// All terms are positive, so there is no cancellation.
double erf_series(double x) {
  const double x2 = x * x;
  double term = x;
  double sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= 2.0 * x2 / (2.0 * n + 1.0);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return 2.0 * kInvSqrtPi * exp_neg_square(x) * sum;
}

// exp(-z*z/2), split the same way.
double exp_neg_half_square(double z) {
  const double hi = std::trunc(z * 16.0) / 16.0;
  const double lo = z - hi;
  return std::exp(-0.5 * hi * hi) * std::exp(-0.5 * lo * (z + hi));
}

// Denominator of the Laplace continued fraction for x >= 1:
//   erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// evaluated with the modified Lentz algorithm.
double laplace_fraction(double x) {
  constexpr double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int k = 1; k < 5000; ++k) {
    const double a = 0.5 * k;
    d = x + a * d;
    if (std::abs(d) < tiny) d = tiny;
    c = x + a / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return f;
}

// 1 - Phi(z) for z >= 0. The Gaussian factor is formed from z itself so the
// far tail does not inherit the rounding of z / sqrt(2).
double upper_tail(double z) {
  const double x = z * kSqrt1_2;
  if (x < kSeriesLimit) return 0.5 * (1.0 - erf_series(x));
  if (z > 38.7) return 0.0;  // below the smallest subnormal
  return 0.5 * kInvSqrtPi * exp_neg_half_square(z) / laplace_fraction(x);
}

void require_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("normal: sigma must be positive and finite, got " + std::to_string(sigma));
  }
}

}  // namespace

UnitInterval::UnitInterval(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw DomainError("probability outside [0, 1]: " + std::to_string(value));
  }
}

double erfc_approx(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.0) return 2.0 - erfc_approx(-x);
  if (x < kSeriesLimit) return 1.0 - erf_series(x);
  if (x > 27.3) return 0.0;  // below the smallest subnormal
  return kInvSqrtPi * exp_neg_square(x) / laplace_fraction(x);
}

double standard_normal_cdf(double z) {
  if (std::isnan(z)) throw DomainError("normal_cdf: NaN argument");
  return z < 0.0 ? upper_tail(-z) : 1.0 - upper_tail(z);
}

double standard_normal_sf(double z) {
  if (std::isnan(z)) throw DomainError("normal_sf: NaN argument");
  return z < 0.0 ? 1.0 - upper_tail(-z) : upper_tail(z);
}

double standard_normal_pdf(double z) { return kInvSqrt2Pi * exp_neg_half_square(z); }

double standard_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("normal_quantile: p must lie strictly inside (0, 1), got " + std::to_string(p));
  }
  // P. J. Acklam's rational approximation, relative error below 1.15e-9.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  const bool upper = p > 0.5;
  const double q_tail = upper ? 1.0 - p : p;  // exact for p >= 0.5
  double z = 0.0;
  if (q_tail < p_low) {
    const double q = std::sqrt(-2.0 * std::log(q_tail));
    z = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    if (upper) z = -z;
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    z = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }

  // Newton refinement against the tail that keeps relative precision.
  for (int step = 0; step < 2; ++step) {
    const double density = standard_normal_pdf(z);
    if (!(density > 0.0)) break;
    if (upper) {
      z += (standard_normal_sf(z) - q_tail) / density;
    } else {
      z -= (standard_normal_cdf(z) - q_tail) / density;
    }
  }
  return z;
}

double normal_cdf(double x, double mu, double sigma) {
  require_sigma(sigma);
  return standard_normal_cdf((x - mu) / sigma);
}

double normal_sf(double x, double mu, double sigma) {
  require_sigma(sigma);
  return standard_normal_sf((x - mu) / sigma);
}

double normal_quantile(double p, double mu, double sigma) {
  require_sigma(sigma);
  return mu + sigma * standard_normal_quantile(p);
}

// ---------------------------------------------------------------------------

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> samples)
    : values_(std::move(samples)) {
  if (values_.empty()) throw DomainError("empirical distribution: no samples");
  for (double v : values_) {
    if (std::isnan(v)) throw DomainError("empirical distribution: NaN sample");
  }
  std::sort(values_.begin(), values_.end());
}

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> values,
                                             std::vector<double> weights) {
  if (values.empty()) throw DomainError("empirical distribution: no samples");
  if (values.size() != weights.size()) {
    throw DomainError("empirical distribution: values and weights differ in length");
  }
  for (double v : values) {
    if (std::isnan(v)) throw DomainError("empirical distribution: NaN sample");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  double total = 0.0;
  std::vector<double> merged_w;
  for (std::size_t idx : order) {
    const double v = values[idx];
    const double w = weights[idx];
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("empirical distribution: negative weight");
    total += w;
    if (w == 0.0) continue;  // zero-mass points are not in the support
    if (!values_.empty() && values_.back() == v) {
      merged_w.back() += w;
    } else {
      values_.push_back(v);
      merged_w.push_back(w);
    }
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DomainError("empirical distribution: weights sum to " + std::to_string(total));
  }
  cumulative_.resize(merged_w.size());
  std::partial_sum(merged_w.begin(), merged_w.end(), cumulative_.begin());
  weights_ = std::move(merged_w);
}

double EmpiricalDistribution::cdf(double t) const {
  const auto upto = static_cast<std::size_t>(
      std::upper_bound(values_.begin(), values_.end(), t) - values_.begin());
  if (upto == 0) return 0.0;
  if (!weights_) return static_cast<double>(upto) / static_cast<double>(values_.size());
  return cumulative_[upto - 1];
}

double EmpiricalDistribution::mass(double y) const {
  const auto [lo, hi] = std::equal_range(values_.begin(), values_.end(), y);
  if (lo == hi) return 0.0;
  if (!weights_) {
    return static_cast<double>(hi - lo) / static_cast<double>(values_.size());
  }
  return (*weights_)[static_cast<std::size_t>(lo - values_.begin())];
}

double empirical_quantile(const EmpiricalDistribution& dist, UnitInterval tau) {
  const auto values = dist.sorted_values();
  if (values.empty()) throw DomainError("empirical_quantile: empty distribution");
  const double t = tau.value();
  if (dist.weighted()) {
    // Smallest atom whose cumulative mass reaches tau; the last atom absorbs
    // any rounding shortfall at tau = 1.
    double cum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      cum = dist.cdf(values[i]);
      if (cum >= t) return values[i];
    }
    return values.back();
  }
  const std::size_t n = values.size();
  const double nd = static_cast<double>(n);
  auto reaches = [&](std::size_t k) { return static_cast<double>(k) / nd >= t; };
  auto k = static_cast<std::size_t>(std::clamp(std::ceil(t * nd), 1.0, nd));
  // Fix up the rounding of t * n so the comparison matches cdf() exactly.
  while (k > 1 && reaches(k - 1)) --k;
  while (k < n && !reaches(k)) ++k;
  return values[k - 1];
}

std::size_t conformal_rank(UnitInterval alpha, std::size_t n) {
  if (n == 0) throw DomainError("conformal_quantile: no scores");
  const double target = (1.0 - alpha.value()) * (static_cast<double>(n) + 1.0);
  // Tolerance absorbs representation error in alpha (0.8 * 10 must give 8).
  const double k = std::ceil(target - 1e-9 * std::max(1.0, target));
  return static_cast<std::size_t>(std::clamp(k, 1.0, static_cast<double>(n)));
}

double conformal_quantile(std::span<const double> scores, UnitInterval alpha, std::size_t n) {
  if (scores.empty()) throw DomainError("conformal_quantile: no scores");
  if (scores.size() != n) {
    throw DomainError("conformal_quantile: expected " + std::to_string(n) + " scores, got " +
                      std::to_string(scores.size()));
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  const std::size_t k = conformal_rank(alpha, n);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  return sorted[k - 1];
}

double mid_cdf(const EmpiricalDistribution& dist, double y, SupportMode mode) {
  if (!dist.weighted()) throw DomainError("mid_cdf: requires a weighted (discrete) distribution");
  const double p = dist.mass(y);
  if (mode == SupportMode::strict && p == 0.0) {
    throw DomainError("mid_cdf: " + std::to_string(y) + " is not in the support");
  }
  return dist.cdf(y) - 0.5 * p;
}

double ks_distance_uniform(std::span<const double> values) {
  if (values.empty()) return 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double above = static_cast<double>(i + 1) / n - sorted[i];
    const double below = sorted[i] - static_cast<double>(i) / n;
    d = std::max({d, above, below});
  }
  return d;
}

PitResult pit_ranks(std::span<const double> cdf_values) {
  for (double u : cdf_values) UnitInterval{u};
  PitResult out;
  out.values.assign(cdf_values.begin(), cdf_values.end());
  out.ks_distance = ks_distance_uniform(cdf_values);
  return out;
}

bool composite_quantile_check(const EmpiricalDistribution& dist,
                              const std::function<double(double)>& g, UnitInterval tau) {
  const auto values = dist.sorted_values();
  std::vector<double> mapped(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    mapped[i] = g(values[i]);
    if (std::isnan(mapped[i]) || (i > 0 && mapped[i] < mapped[i - 1])) {
      throw DomainError("composite_quantile_check: map is not increasing on the sample");
    }
  }
  double lhs = 0.0;
  if (dist.weighted()) {
    std::vector<double> weights(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) weights[i] = dist.mass(values[i]);
    lhs = empirical_quantile(EmpiricalDistribution(mapped, weights), tau);
  } else {
    lhs = empirical_quantile(EmpiricalDistribution(mapped), tau);
  }
  return lhs == g(empirical_quantile(dist, tau));
}

}  // namespace genpred
