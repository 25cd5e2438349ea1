#pragma once

#include <span>
#include <vector>

#include "genpred/random.hpp"

namespace genpred::analytic {

/// theta ~ N(mu, alpha2), y_i | theta ~ N(theta, sigma2). Second arguments are variances.
struct NormalNormalModel {
  double mu = 0.0;
  double alpha2 = 1.0;
  double sigma2 = 1.0;

  void validate() const;
  double prior_sd() const;
};

struct PosteriorSummary {
  double mu_star = 0.0;
  double sigma2_star = 0.0;
  double t = 0.0;  // sigma2 + n * alpha2
  double s = 0.0;  // sum of observations
  std::size_t n = 0;

  double sigma_star() const;
};

/// g(p) = Phi(lambda1 * Phi^{-1}(p) + lambda).
struct WangDistortion {
  double lambda1 = 1.0;
  double lambda = 0.0;

  double operator()(double p) const;
  // Same map, with the input given by its survival/complement pair so that
  // whichever tail is small keeps full relative precision.
  double apply(double p, double one_minus_p) const;
  double inverse(double p) const;
};

PosteriorSummary posterior(const NormalNormalModel& model, std::span<const double> data);
// The model with the posterior as its prior, for sequential updating.
NormalNormalModel updated_model(const NormalNormalModel& model, const PosteriorSummary& post);

WangDistortion wang_parameters(const NormalNormalModel& model, const PosteriorSummary& post);
double wang_distortion(const WangDistortion& g, double p);

// g(1 - Phi(theta; mu, alpha)). Debug builds also evaluate the posterior
// survival 1 - Phi(theta; mu*, sigma*) and assert agreement to 1e-10.
double distort_prior_survival(const NormalNormalModel& model, const PosteriorSummary& post,
                              double theta);
double posterior_survival(const PosteriorSummary& post, double theta);
double prior_survival(const NormalNormalModel& model, double theta);

// Phi((y* - ybar) / (sigma sqrt(1 + 1/n))).
double predictive_cdf(double y_star, double y_bar, double sigma, std::size_t n);
// ybar + sigma sqrt(1 + 1/n) Phi^{-1}(tau).
double predictive_quantile(double tau, double y_bar, double sigma, std::size_t n);
double predictive_variance(double sigma, std::size_t n);

struct Simulation {
  double theta = 0.0;
  std::vector<double> y;
};

// `count` draws theta ~ prior, y | theta ~ likelihood^n.
std::vector<Simulation> simulate(const NormalNormalModel& model, std::size_t n, std::size_t count,
                                 RandomSource& rng);

struct OlsFit {
  std::vector<double> weights;
  double intercept = 0.0;

  double statistic(std::span<const double> y) const;
};

// Least squares of theta on (1, y_1..y_n). Throws NumericalError on a rank-deficient design.
OlsFit learn_sufficient_statistic(std::span<const Simulation> simulations);

// Pearson correlation of the fitted statistic with the sample mean across simulations.
double statistic_mean_correlation(const OlsFit& fit, std::span<const Simulation> simulations);

}  // namespace genpred::analytic
