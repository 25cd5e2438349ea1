#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "genpred/errors.hpp"

namespace genpred {

/// A probability in the closed interval [0, 1].
class UnitInterval {
 public:
  explicit UnitInterval(double value);
  double value() const noexcept { return value_; }
  operator double() const noexcept { return value_; }

 private:
  double value_;
};

// ---------------------------------------------------------------------------
// Normal distribution
// ---------------------------------------------------------------------------

// erfc for real x. Series for |x| < 1, Lentz continued fraction above;
// relative precision is kept in the upper tail.
double erfc_approx(double x);

// Lower-tail standard normal probability Phi(z), relative precision in both tails.
double standard_normal_cdf(double z);
// Upper tail 1 - Phi(z) computed without cancellation.
double standard_normal_sf(double z);
double standard_normal_pdf(double z);
// Inverse of Phi on (0, 1). Acklam rational start refined by two Newton steps.
double standard_normal_quantile(double p);

double normal_cdf(double x, double mu, double sigma);
double normal_sf(double x, double mu, double sigma);
double normal_quantile(double p, double mu, double sigma);

// ---------------------------------------------------------------------------
// Empirical distributions
// ---------------------------------------------------------------------------

/// Sorted sample with optional probability masses.
///
/// Without weights each value carries mass 1/n. With weights, equal values are
/// merged into a single atom and masses must be non-negative and sum to 1
/// (within 1e-12).
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::vector<double> samples);
  EmpiricalDistribution(std::vector<double> values, std::vector<double> weights);

  std::span<const double> sorted_values() const noexcept { return values_; }
  bool weighted() const noexcept { return weights_.has_value(); }
  std::size_t size() const noexcept { return values_.size(); }

  // Right-continuous CDF F(t) = P(Y <= t).
  double cdf(double t) const;
  // P(Y = y).
  double mass(double y) const;

 private:
  std::vector<double> values_;
  std::optional<std::vector<double>> weights_;
  std::vector<double> cumulative_;  // weighted only
};

// inf{t : F(t) >= tau}; tau = 0 maps to the minimum.
double empirical_quantile(const EmpiricalDistribution& dist, UnitInterval tau);

// The ceil((1 - alpha)(n + 1))-th smallest score, clamped to [1, n].
double conformal_quantile(std::span<const double> scores, UnitInterval alpha, std::size_t n);
std::size_t conformal_rank(UnitInterval alpha, std::size_t n);

enum class SupportMode { lenient, strict };

// F(y) - p(y)/2. Requires a weighted (discrete) distribution.
double mid_cdf(const EmpiricalDistribution& dist, double y, SupportMode mode = SupportMode::lenient);

struct PitResult {
  std::vector<double> values;
  double ks_distance = 0.0;
};

// Probability integral transform values plus their KS distance to Uniform(0, 1).
PitResult pit_ranks(std::span<const double> cdf_values);
double ks_distance_uniform(std::span<const double> values);

// Checks Q_{g(Y)}(tau) == g(Q_Y(tau)) exactly on the sample. Throws if g is
// decreasing anywhere on the sorted sample.
bool composite_quantile_check(const EmpiricalDistribution& dist,
                              const std::function<double(double)>& g, UnitInterval tau);

}  // namespace genpred
