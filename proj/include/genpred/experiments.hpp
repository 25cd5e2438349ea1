#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "genpred/analytic.hpp"
#include "genpred/execution.hpp"
#include "genpred/kernel.hpp"
#include "genpred/qnn.hpp"

namespace genpred::experiments {

struct McEstimate {
  double value = 0.0;
  double se = 0.0;
};

// Ratio of means sum(a)/sum(b) with a delta-method standard error.
McEstimate ratio_of_means(std::span<const double> a, std::span<const double> b);
McEstimate mean_with_se(std::span<const double> x);

// Sample median; the average of the two middle values for even sizes. Reorders `x`.
double median_inplace(std::span<double> x);

// ---------------------------------------------------------------------------
// Mean versus median (normal location model, unit noise)
// ---------------------------------------------------------------------------

struct EfronConfig {
  std::size_t n = 1001;
  std::size_t replications = 10000;
  std::uint64_t seed = 20240601;
  double theta = 0.0;
  std::size_t future = 1;  // prediction target: mean of this many new draws
  Execution execution = Execution::parallel;

  void validate() const;
};

// E[(median - theta)^2] / E[(mean - theta)^2].
McEstimate efron_estimation_ratio(const EfronConfig& config);

// Variance of the median of n standard normals by direct simulation.
McEstimate median_variance_oracle(std::size_t n, std::size_t replications, std::uint64_t seed,
                                  Execution execution = Execution::parallel);

struct PredictionRatio {
  std::size_t n = 0;
  McEstimate ratio;            // E[(median - x)^2] / E[(mean - x)^2]
  McEstimate median_variance;  // nested oracle, Var(median) = pi * rho
  double rho = 0.0;
  McEstimate comparator;       // (1/m + pi rho) / (1/m + 1/n) with m = future
};

PredictionRatio efron_prediction_ratio(const EfronConfig& config, std::size_t oracle_replications);

std::vector<PredictionRatio> efron_prediction_sweep(const std::vector<std::size_t>& ns,
                                                    const EfronConfig& base,
                                                    std::size_t oracle_replications);

inline const std::vector<std::size_t> kDefaultPredictionGrid{5, 11, 31, 101, 1001};

// ---------------------------------------------------------------------------
// Normal-normal numerical example
// ---------------------------------------------------------------------------

inline constexpr double kReportedPosteriorMean = 3.28;
inline constexpr double kReportedPosteriorSecond = 0.98;

struct NormalDemoConfig {
  analytic::NormalNormalModel model{0.0, 5.0, 10.0};
  double true_theta = 3.0;
  std::size_t n = 100;
  std::uint64_t seed = 19;  // y_bar = 3.348, mu* = 3.2825
  std::size_t theta_grid_points = 2001;
  std::size_t p_grid_points = 999;
};

struct DemoTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct NormalDemoReport {
  std::vector<double> data;
  double y_bar = 0.0;
  analytic::PosteriorSummary posterior;
  analytic::WangDistortion distortion;
  double max_identity_error = 0.0;  // over mu* +- 6 sigma*
  bool variance_matches_reported = false;
  std::string discrepancy_note;
  DemoTable densities;    // panel (a): prior, likelihood and posterior densities
  DemoTable distortion_curve;  // panel (b): p, g(p)
  DemoTable survival;     // panel (c): prior, posterior and distorted survival curves
};

NormalDemoReport run_normal_normal_demo(const NormalDemoConfig& config);

// Max |g(1 - Phi(theta; mu, alpha)) - (1 - Phi(theta; mu*, sigma*))| over an
// evenly spaced grid on mu* +- 6 sigma*.
double distortion_identity_error(const analytic::NormalNormalModel& model,
                                 const analytic::PosteriorSummary& post, std::size_t points);

// ---------------------------------------------------------------------------
// Conformalized quantile regression coverage benchmark
// ---------------------------------------------------------------------------

enum class Dgp { homoscedastic, heteroscedastic };
std::string to_string(Dgp dgp);
Dgp parse_dgp(const std::string& s);

// x ~ U(-2, 2); y = x + eps (homoscedastic) or y = x + |x| eps, eps ~ N(0, 1).
Dataset draw_dgp(Dgp dgp, std::size_t n, RandomSource& rng);

struct CoverageBenchConfig {
  Dgp dgp = Dgp::heteroscedastic;
  std::size_t n_train = 1000;
  std::size_t n_cal = 500;
  std::size_t n_test = 1000;
  double alpha = 0.1;
  std::size_t replications = 200;
  std::uint64_t seed = 7;
  std::vector<std::size_t> hidden{32, 32};
  qnn::Activation activation = qnn::Activation::relu;
  qnn::TrainingConfig training = default_training();
  kernel::KernelConfig kernel{0.25, kernel::KernelForm::radial};
  double inner_probe = 0.2;  // CQR width is also reported at x = +-inner_probe
  double outer_probe = 2.0;  // and at x = +-outer_probe
  Execution execution = Execution::parallel;

  static qnn::TrainingConfig default_training();
  void validate() const;
};

struct MethodSummary {
  std::string method;
  McEstimate coverage;
  McEstimate width;
};

struct ReplicationResult {
  bool ok = false;
  std::string error;
  double qnn_coverage = 0.0, qnn_width = 0.0;
  double cqr_coverage = 0.0, cqr_width = 0.0;
  double nw_coverage = 0.0, nw_width = 0.0;
  double qhat = 0.0;
  double cqr_width_inner = 0.0, cqr_width_outer = 0.0;
};

struct CoverageBenchResult {
  std::vector<MethodSummary> methods;  // qnn, cqr, nw
  McEstimate cqr_width_inner;
  McEstimate cqr_width_outer;
  std::size_t failures = 0;
  std::vector<ReplicationResult> replications;
};

// Data of one replication and the seed used for both network initialization
// and minibatch order.
struct ReplicationDraw {
  Dataset train;
  Dataset calibration;
  Dataset test;
  std::uint64_t model_seed = 0;
};

ReplicationDraw draw_replication(const CoverageBenchConfig& config, std::size_t index);
ReplicationResult run_coverage_replication(const CoverageBenchConfig& config, std::size_t index);
CoverageBenchResult run_coverage_bench(const CoverageBenchConfig& config);

}  // namespace genpred::experiments
