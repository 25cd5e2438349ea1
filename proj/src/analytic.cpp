#include "genpred/analytic.hpp"

#include <cassert>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "genpred/errors.hpp"
#include "genpred/format.hpp"
#include "genpred/numerics.hpp"

namespace genpred::analytic {

void NormalNormalModel::validate() const {
  if (!(alpha2 > 0.0) || !std::isfinite(alpha2)) throw DomainError("prior variance must be positive");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw DomainError("likelihood variance must be positive");
  }
  if (!std::isfinite(mu)) throw DomainError("prior mean must be finite");
}

double NormalNormalModel::prior_sd() const { return std::sqrt(alpha2); }

double PosteriorSummary::sigma_star() const { return std::sqrt(sigma2_star); }

double WangDistortion::operator()(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("wang_distortion: p must lie in (0, 1)");
  return apply(p, 1.0 - p);
}

double WangDistortion::apply(double p, double one_minus_p) const {
  if (!(p > 0.0 && one_minus_p > 0.0)) throw DomainError("wang_distortion: p must lie in (0, 1)");
  const double z = p <= 0.5 ? standard_normal_quantile(p) : -standard_normal_quantile(one_minus_p);
  return standard_normal_cdf(lambda1 * z + lambda);
}

double WangDistortion::inverse(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("wang inverse: p must lie in (0, 1)");
  return standard_normal_cdf((standard_normal_quantile(p) - lambda) / lambda1);
}

PosteriorSummary posterior(const NormalNormalModel& model, std::span<const double> data) {
  model.validate();
  if (data.empty()) throw DomainError("posterior: no observations");
  PosteriorSummary post;
  post.n = data.size();
  post.s = std::accumulate(data.begin(), data.end(), 0.0);
  post.t = model.sigma2 + static_cast<double>(post.n) * model.alpha2;
  post.mu_star = (model.sigma2 * model.mu + model.alpha2 * post.s) / post.t;
  post.sigma2_star = model.alpha2 * model.sigma2 / post.t;
  return post;
}

NormalNormalModel updated_model(const NormalNormalModel& model, const PosteriorSummary& post) {
  return {post.mu_star, post.sigma2_star, model.sigma2};
}

WangDistortion wang_parameters(const NormalNormalModel& model, const PosteriorSummary& post) {
  const double alpha = model.prior_sd();
  const double lambda1 = alpha / post.sigma_star();
  const double lambda = alpha * lambda1 * (post.s - static_cast<double>(post.n) * model.mu) / post.t;
  return {lambda1, lambda};
}

double wang_distortion(const WangDistortion& g, double p) { return g(p); }

double prior_survival(const NormalNormalModel& model, double theta) {
  return normal_sf(theta, model.mu, model.prior_sd());
}

double posterior_survival(const PosteriorSummary& post, double theta) {
  return normal_sf(theta, post.mu_star, post.sigma_star());
}

double distort_prior_survival(const NormalNormalModel& model, const PosteriorSummary& post,
                              double theta) {
  const WangDistortion g = wang_parameters(model, post);
  const double sf = prior_survival(model, theta);
  const double cdf = normal_cdf(theta, model.mu, model.prior_sd());
  const double distorted = g.apply(sf, cdf);
  assert(std::abs(distorted - posterior_survival(post, theta)) <= 1e-10);
  return distorted;
}

double predictive_variance(double sigma, std::size_t n) {
  if (n == 0) throw DomainError("predictive: n must be >= 1");
  return sigma * sigma * (1.0 + 1.0 / static_cast<double>(n));
}

double predictive_cdf(double y_star, double y_bar, double sigma, std::size_t n) {
  if (!(sigma > 0.0)) throw DomainError("predictive_cdf: sigma must be positive");
  return normal_cdf(y_star, y_bar, std::sqrt(predictive_variance(sigma, n)));
}

double predictive_quantile(double tau, double y_bar, double sigma, std::size_t n) {
  if (!(sigma > 0.0)) throw DomainError("predictive_quantile: sigma must be positive");
  return normal_quantile(tau, y_bar, std::sqrt(predictive_variance(sigma, n)));
}

std::vector<Simulation> simulate(const NormalNormalModel& model, std::size_t n, std::size_t count,
                                 RandomSource& rng) {
  model.validate();
  const double prior_sd = model.prior_sd();
  const double noise_sd = std::sqrt(model.sigma2);
  std::vector<Simulation> sims(count);
  for (auto& sim : sims) {
    sim.theta = rng.normal(model.mu, prior_sd);
    sim.y.resize(n);
    for (double& y : sim.y) y = rng.normal(sim.theta, noise_sd);
  }
  return sims;
}

double OlsFit::statistic(std::span<const double> y) const {
  double s = intercept;
  for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * y[i];
  return s;
}

OlsFit learn_sufficient_statistic(std::span<const Simulation> simulations) {
  if (simulations.empty()) throw DomainError("learn_sufficient_statistic: no simulations");
  const std::size_t n = simulations.front().y.size();
  if (n == 0) throw DomainError("learn_sufficient_statistic: empty observation vectors");
  if (simulations.size() < n + 2) {
    throw DomainError("learn_sufficient_statistic: need at least " + std::to_string(n + 2) +
                      " simulations, got " + std::to_string(simulations.size()));
  }
  const auto rows = static_cast<Eigen::Index>(simulations.size());
  const auto cols = static_cast<Eigen::Index>(n + 1);
  Eigen::MatrixXd design(rows, cols);
  Eigen::VectorXd target(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& sim = simulations[static_cast<std::size_t>(r)];
    if (sim.y.size() != n) throw DomainError("learn_sufficient_statistic: ragged observation vectors");
    design(r, 0) = 1.0;
    for (std::size_t j = 0; j < n; ++j) design(r, static_cast<Eigen::Index>(j + 1)) = sim.y[j];
    target(r) = sim.theta;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < cols) {
    throw NumericalError("learn_sufficient_statistic: design has rank " + std::to_string(qr.rank()) +
                         " < " + std::to_string(cols) + " (max pivot " +
                         format_double(qr.maxPivot()) + ")");
  }
  const Eigen::VectorXd beta = qr.solve(target);
  OlsFit fit;
  fit.intercept = beta(0);
  fit.weights.resize(n);
  for (std::size_t j = 0; j < n; ++j) fit.weights[j] = beta(static_cast<Eigen::Index>(j + 1));
  return fit;
}

double statistic_mean_correlation(const OlsFit& fit, std::span<const Simulation> simulations) {
  const double m = static_cast<double>(simulations.size());
  double sa = 0.0, sb = 0.0;
  std::vector<double> a(simulations.size()), b(simulations.size());
  for (std::size_t i = 0; i < simulations.size(); ++i) {
    const auto& y = simulations[i].y;
    a[i] = fit.statistic(y);
    b[i] = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    sa += a[i];
    sb += b[i];
  }
  sa /= m;
  sb /= m;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - sa) * (b[i] - sb);
    va += (a[i] - sa) * (a[i] - sa);
    vb += (b[i] - sb) * (b[i] - sb);
  }
  if (!(va > 0.0 && vb > 0.0)) return 0.0;
  return cov / std::sqrt(va * vb);
}

}  // namespace genpred::analytic
