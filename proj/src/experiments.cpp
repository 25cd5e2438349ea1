#include "genpred/experiments.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "genpred/conformal.hpp"
#include "genpred/errors.hpp"
#include "genpred/format.hpp"
#include "genpred/numerics.hpp"

namespace genpred::experiments {

McEstimate ratio_of_means(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw DomainError("ratio_of_means: bad sample sizes");
  const double m = static_cast<double>(a.size());
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ratio = sa / sb;
  const double mean_b = sb / m;
  double resid = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = a[i] - ratio * b[i];
    resid += r * r;
  }
  const double var = a.size() > 1 ? resid / (m - 1.0) : 0.0;
  return {ratio, std::sqrt(var / m) / mean_b};
}

McEstimate mean_with_se(std::span<const double> x) {
  if (x.empty()) return {};
  const double m = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += v;
  const double mean = s / m;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double var = x.size() > 1 ? ss / (m - 1.0) : 0.0;
  return {mean, std::sqrt(var / m)};
}

double median_inplace(std::span<double> x) {
  if (x.empty()) throw DomainError("median: empty sample");
  const std::size_t n = x.size();
  const auto mid = x.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(x.begin(), mid, x.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(x.begin(), mid);
  return (lower + upper) / 2.0;
}

void EfronConfig::validate() const {
  if (n < 2) throw DomainError("Efron experiment: n must be >= 2");
  if (replications < 2) throw DomainError("Efron experiment: need at least two replications");
  if (future < 1) throw DomainError("Efron experiment: future count must be >= 1");
}

namespace {

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Runs body(r, rng, out_a, out_b) for every replication with a per-replication
// sub-stream. Parallel and serial paths fill the same slots.
template <typename Body>
void for_each_replication(std::size_t replications, std::uint64_t seed, Execution execution,
                          Body&& body) {
  const RandomSource root = RandomSource(seed).substream(streams::kExperiments);
  if (execution == Execution::serial) {
    for (std::size_t r = 0; r < replications; ++r) {
      RandomSource rng = root.substream(r);
      body(r, rng);
    }
    return;
  }
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t rr = 0; rr < static_cast<std::ptrdiff_t>(replications); ++rr) {
    const auto r = static_cast<std::size_t>(rr);
    RandomSource rng = root.substream(r);
    body(r, rng);
  }
}

}  // namespace

McEstimate efron_estimation_ratio(const EfronConfig& config) {
  config.validate();
  std::vector<double> median_sq(config.replications);
  std::vector<double> mean_sq(config.replications);
  for_each_replication(config.replications, config.seed, config.execution,
                       [&](std::size_t r, RandomSource& rng) {
                         std::vector<double> x(config.n);
                         for (double& v : x) v = config.theta + rng.normal();
                         const double mean = mean_of(x);
                         const double med = median_inplace(x);
                         median_sq[r] = (med - config.theta) * (med - config.theta);
                         mean_sq[r] = (mean - config.theta) * (mean - config.theta);
                       });
  return ratio_of_means(median_sq, mean_sq);
}

McEstimate median_variance_oracle(std::size_t n, std::size_t replications, std::uint64_t seed,
                                  Execution execution) {
  if (n < 1 || replications < 2) throw DomainError("median_variance_oracle: bad sizes");
  std::vector<double> medians(replications);
  for_each_replication(replications, seed, execution, [&](std::size_t r, RandomSource& rng) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    medians[r] = median_inplace(x);
  });
  // Variance about the known centre 0, with the SE of a mean of squares.
  std::vector<double> squares(replications);
  for (std::size_t r = 0; r < replications; ++r) squares[r] = medians[r] * medians[r];
  return mean_with_se(squares);
}

PredictionRatio efron_prediction_ratio(const EfronConfig& config, std::size_t oracle_replications) {
  config.validate();
  std::vector<double> median_err(config.replications);
  std::vector<double> mean_err(config.replications);
  for_each_replication(config.replications, config.seed, config.execution,
                       [&](std::size_t r, RandomSource& rng) {
                         std::vector<double> x(config.n);
                         for (double& v : x) v = config.theta + rng.normal();
                         double future = 0.0;
                         for (std::size_t j = 0; j < config.future; ++j) {
                           future += config.theta + rng.normal();
                         }
                         future /= static_cast<double>(config.future);
                         const double mean = mean_of(x);
                         const double med = median_inplace(x);
                         median_err[r] = (med - future) * (med - future);
                         mean_err[r] = (mean - future) * (mean - future);
                       });

  PredictionRatio out;
  out.n = config.n;
  out.ratio = ratio_of_means(median_err, mean_err);
  // Independent stream for the oracle.
  out.median_variance = median_variance_oracle(config.n, oracle_replications,
                                               splitmix64(config.seed ^ 0x6f7261636c65ULL),
                                               config.execution);
  out.rho = out.median_variance.value / std::numbers::pi;
  const double inv_m = 1.0 / static_cast<double>(config.future);
  const double denom = inv_m + 1.0 / static_cast<double>(config.n);
  out.comparator = {(inv_m + out.median_variance.value) / denom, out.median_variance.se / denom};
  return out;
}

std::vector<PredictionRatio> efron_prediction_sweep(const std::vector<std::size_t>& ns,
                                                    const EfronConfig& base,
                                                    std::size_t oracle_replications) {
  std::vector<PredictionRatio> out;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    EfronConfig cfg = base;
    cfg.n = ns[i];
    cfg.seed = splitmix64(base.seed + i);
    out.push_back(efron_prediction_ratio(cfg, oracle_replications));
  }
  return out;
}

// ---------------------------------------------------------------------------

double distortion_identity_error(const analytic::NormalNormalModel& model,
                                 const analytic::PosteriorSummary& post, std::size_t points) {
  if (points < 2) throw DomainError("distortion_identity_error: need at least two grid points");
  const double lo = post.mu_star - 6.0 * post.sigma_star();
  const double hi = post.mu_star + 6.0 * post.sigma_star();
  double worst = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double theta = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    const double lhs = analytic::distort_prior_survival(model, post, theta);
    const double rhs = analytic::posterior_survival(post, theta);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

NormalDemoReport run_normal_normal_demo(const NormalDemoConfig& config) {
  const auto& model = config.model;
  model.validate();
  if (config.n == 0) throw DomainError("normal-normal demo: n must be positive");
  NormalDemoReport report;

  RandomSource rng = RandomSource(config.seed).substream(streams::kExperiments);
  const double noise_sd = std::sqrt(model.sigma2);
  report.data.resize(config.n);
  for (double& y : report.data) y = rng.normal(config.true_theta, noise_sd);
  report.y_bar = mean_of(report.data);
  report.posterior = analytic::posterior(model, report.data);
  report.distortion = analytic::wang_parameters(model, report.posterior);
  report.max_identity_error =
      distortion_identity_error(model, report.posterior, config.theta_grid_points);

  const double var = report.posterior.sigma2_star;
  report.variance_matches_reported = std::abs(var - kReportedPosteriorSecond) < 0.005 ||
                                     std::abs(std::sqrt(var) - kReportedPosteriorSecond) < 0.005;
  report.discrepancy_note =
      "reported posterior N(" + format_double(kReportedPosteriorMean) + ", " +
      format_double(kReportedPosteriorSecond) + "); the conjugate formulas give mu* = " +
      format_double(report.posterior.mu_star) + " and sigma*^2 = alpha2*sigma2/t = " +
      format_double(var) + " (sd " + format_double(std::sqrt(var)) + "). " +
      (report.variance_matches_reported
           ? "The reported second parameter is reproduced."
           : "The reported second parameter 0.98 is NOT reproduced as a variance or a standard "
             "deviation; it matches the shrinkage factor n*alpha2/t = " +
                 format_double(static_cast<double>(report.posterior.n) * model.alpha2 /
                               report.posterior.t) +
                 ".");

  // Panel (a): densities on a theta/y grid covering prior and likelihood.
  const double prior_sd = model.prior_sd();
  const double lo = std::min(model.mu - 4.0 * prior_sd, config.true_theta - 4.0 * noise_sd);
  const double hi = std::max(model.mu + 4.0 * prior_sd, config.true_theta + 4.0 * noise_sd);
  const std::size_t points = config.theta_grid_points;
  const double post_sd = report.posterior.sigma_star();
  report.densities.columns = {"x", "prior", "likelihood", "posterior"};
  for (std::size_t i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    report.densities.rows.push_back(
        {x, standard_normal_pdf((x - model.mu) / prior_sd) / prior_sd,
         standard_normal_pdf((x - config.true_theta) / noise_sd) / noise_sd,
         standard_normal_pdf((x - report.posterior.mu_star) / post_sd) / post_sd});
  }

  // Panel (b): the distortion function on (0, 1).
  report.distortion_curve.columns = {"p", "g"};
  for (std::size_t i = 1; i <= config.p_grid_points; ++i) {
    const double p = static_cast<double>(i) / static_cast<double>(config.p_grid_points + 1);
    report.distortion_curve.rows.push_back({p, report.distortion(p)});
  }

  // Panel (c): survival curves; the distorted prior must overlay the posterior.
  report.survival.columns = {"theta", "prior_survival", "posterior_survival", "distorted_prior"};
  const double s_lo = std::min(model.mu - 3.0 * prior_sd, report.posterior.mu_star - 6.0 * post_sd);
  const double s_hi = std::max(model.mu + 3.0 * prior_sd, report.posterior.mu_star + 6.0 * post_sd);
  for (std::size_t i = 0; i < points; ++i) {
    const double theta = s_lo + (s_hi - s_lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    report.survival.rows.push_back({theta, analytic::prior_survival(model, theta),
                                    analytic::posterior_survival(report.posterior, theta),
                                    analytic::distort_prior_survival(model, report.posterior, theta)});
  }
  return report;
}

// ---------------------------------------------------------------------------

std::string to_string(Dgp dgp) {
  return dgp == Dgp::homoscedastic ? "homoscedastic" : "heteroscedastic";
}

Dgp parse_dgp(const std::string& s) {
  if (s == "homoscedastic") return Dgp::homoscedastic;
  if (s == "heteroscedastic") return Dgp::heteroscedastic;
  throw DomainError("unknown dgp '" + s + "' (expected homoscedastic or heteroscedastic)");
}

Dataset draw_dgp(Dgp dgp, std::size_t n, RandomSource& rng) {
  Dataset data(n, 1);
  data.feature_names = {"x"};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-2.0, 2.0);
    const double eps = rng.normal();
    data.features[i] = x;
    data.targets[i] = dgp == Dgp::homoscedastic ? x + eps : x + std::abs(x) * eps;
  }
  return data;
}

qnn::TrainingConfig CoverageBenchConfig::default_training() {
  qnn::TrainingConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.batch_size = 64;
  cfg.epochs = 60;
  return cfg;
}

void CoverageBenchConfig::validate() const {
  if (n_train < 1 || n_cal < 1 || n_test < 1 || replications < 1) {
    throw DomainError("coverage bench: all counts must be >= 1");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("coverage bench: alpha must lie in (0, 1)");
  training.validate();
  kernel.validate();
}

ReplicationDraw draw_replication(const CoverageBenchConfig& config, std::size_t index) {
  RandomSource rng = RandomSource(config.seed).substream(streams::kExperiments).substream(index);
  ReplicationDraw draw;
  draw.train = draw_dgp(config.dgp, config.n_train, rng);
  draw.calibration = draw_dgp(config.dgp, config.n_cal, rng);
  draw.test = draw_dgp(config.dgp, config.n_test, rng);
  draw.model_seed = rng.next_u64();
  return draw;
}

ReplicationResult run_coverage_replication(const CoverageBenchConfig& config, std::size_t index) {
  ReplicationResult out;
  try {
    const ReplicationDraw draw = draw_replication(config, index);
    const Dataset& train_set = draw.train;
    const Dataset& cal_set = draw.calibration;
    const Dataset& test_set = draw.test;

    qnn::NetworkSpec spec;
    spec.input_dim = 1;
    spec.hidden = config.hidden;
    spec.activation = config.activation;
    spec.grid = qnn::QuantileGrid({config.alpha / 2.0, 1.0 - config.alpha / 2.0});
    qnn::TrainingConfig training = config.training;
    training.seed = draw.model_seed;
    training.execution = Execution::serial;
    const auto fitted =
        qnn::train(qnn::make_network(spec, draw.model_seed), train_set, spec.grid, training).net;

    auto interval_at = [&](std::span<const double> x) {
      return qnn::predict_interval(fitted, x, config.alpha);
    };

    std::vector<conformal::CalibrationPoint> cal_points(cal_set.rows);
    for (std::size_t i = 0; i < cal_set.rows; ++i) {
      const auto iv = interval_at(cal_set.row(i));
      cal_points[i] = {cal_set.targets[i], iv.lower, iv.upper};
    }
    const auto calibration = conformal::calibrate(cal_points, config.alpha);
    out.qhat = calibration.qhat();

    std::vector<PredictionInterval> raw(test_set.rows), cqr(test_set.rows);
    for (std::size_t i = 0; i < test_set.rows; ++i) {
      raw[i] = interval_at(test_set.row(i));
      cqr[i] = conformal::conformalize(raw[i], calibration);
    }
    const auto raw_cov = conformal::evaluate_coverage(raw, test_set.targets);
    const auto cqr_cov = conformal::evaluate_coverage(cqr, test_set.targets);
    out.qnn_coverage = raw_cov.coverage;
    out.qnn_width = raw_cov.mean_width;
    out.cqr_coverage = cqr_cov.coverage;
    out.cqr_width = cqr_cov.mean_width;

    auto probe_width = [&](double at) {
      const double pos[] = {at};
      const double neg[] = {-at};
      return 0.5 * (conformal::conformalize(interval_at(pos), calibration).width() +
                    conformal::conformalize(interval_at(neg), calibration).width());
    };
    out.cqr_width_inner = probe_width(config.inner_probe);
    out.cqr_width_outer = probe_width(config.outer_probe);

    // Kernel baseline: NW mean with a split-conformal constant half-width.
    const auto cal_mean = kernel::nw_predict(train_set, cal_set.features, config.kernel);
    std::vector<double> abs_resid(cal_set.rows);
    for (std::size_t i = 0; i < cal_set.rows; ++i) {
      abs_resid[i] = std::abs(cal_set.targets[i] - cal_mean[i]);
    }
    const double half = conformal_quantile(abs_resid, UnitInterval(config.alpha), abs_resid.size());
    const auto test_mean = kernel::nw_predict(train_set, test_set.features, config.kernel);
    std::vector<PredictionInterval> nw(test_set.rows);
    for (std::size_t i = 0; i < test_set.rows; ++i) {
      nw[i] = {test_mean[i] - half, test_mean[i] + half, 1.0 - config.alpha};
    }
    const auto nw_cov = conformal::evaluate_coverage(nw, test_set.targets);
    out.nw_coverage = nw_cov.coverage;
    out.nw_width = nw_cov.mean_width;
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

CoverageBenchResult run_coverage_bench(const CoverageBenchConfig& config) {
  config.validate();
  CoverageBenchResult result;
  result.replications.resize(config.replications);
  if (config.execution == Execution::serial) {
    for (std::size_t r = 0; r < config.replications; ++r) {
      result.replications[r] = run_coverage_replication(config, r);
    }
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(config.replications); ++r) {
      result.replications[static_cast<std::size_t>(r)] =
          run_coverage_replication(config, static_cast<std::size_t>(r));
    }
  }

  std::vector<double> qc, qw, cc, cw, nc, nw, inner, outer;
  for (const auto& rep : result.replications) {
    if (!rep.ok) {
      ++result.failures;
      continue;
    }
    qc.push_back(rep.qnn_coverage);
    qw.push_back(rep.qnn_width);
    cc.push_back(rep.cqr_coverage);
    cw.push_back(rep.cqr_width);
    nc.push_back(rep.nw_coverage);
    nw.push_back(rep.nw_width);
    inner.push_back(rep.cqr_width_inner);
    outer.push_back(rep.cqr_width_outer);
  }
  result.methods = {{"qnn", mean_with_se(qc), mean_with_se(qw)},
                    {"cqr", mean_with_se(cc), mean_with_se(cw)},
                    {"nw", mean_with_se(nc), mean_with_se(nw)}};
  result.cqr_width_inner = mean_with_se(inner);
  result.cqr_width_outer = mean_with_se(outer);
  return result;
}

}  // namespace genpred::experiments
