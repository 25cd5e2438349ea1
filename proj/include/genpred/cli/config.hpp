#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "genpred/experiments.hpp"
#include "genpred/kernel.hpp"
#include "genpred/qnn.hpp"

namespace genpred::cli {

inline constexpr const char* kVersion = "0.1.0";

// Seed used when neither the config nor --seed sets one.
inline constexpr std::uint64_t kDefaultSeed = 19;

enum class Method { qnn, kernel };
std::string to_string(Method m);
Method parse_method(const std::string& s);

/// Every tunable of every command. Sections of the config file:
///
///   [run]            seed, out
///   [data]           path, calibration_path, input, target, train_fraction
///   [model]          method, path, calibration
///   [network]        taus, hidden, activation, head, embedding_dim, monotone, penalty_weight
///   [training]       learning_rate, batch_size, epochs, huber_kappa, standardize, execution
///   [conformal]      alpha
///   [kernel]         sigma, form
///   [efron]          n, replications, prediction_replications, oracle_replications,
///                    future, sweep, theta
///   [normal_normal]  prior_mean, prior_variance, noise_variance, true_theta, n,
///                    grid_points, p_points
///   [coverage]       dgp, n_train, n_cal, n_test, replications, hidden, learning_rate,
///                    batch_size, epochs
struct RunConfig {
  std::uint64_t seed = kDefaultSeed;
  std::string out = "out";

  std::string data_path;
  std::string calibration_data_path;  // empty: calibrate on the held-out split of data_path
  std::string input_path;
  std::string target = "y";
  double train_fraction = 0.5;

  Method method = Method::qnn;
  std::string model_path;        // empty: <out>/model.gpq
  std::string calibration_path;  // empty: uncalibrated predictions

  std::vector<double> taus{0.05, 0.25, 0.5, 0.75, 0.95};
  std::vector<std::size_t> hidden{64, 64};
  qnn::Activation activation = qnn::Activation::relu;
  qnn::HeadMode head = qnn::HeadMode::multi_head;
  std::size_t embedding_dim = 64;
  qnn::MonotoneMode monotone = qnn::MonotoneMode::increments;
  double penalty_weight = 1.0;

  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 200;
  double huber_kappa = 0.0;
  bool standardize = true;
  Execution execution = Execution::serial;

  double alpha = 0.1;

  double kernel_sigma = 0.25;
  kernel::KernelForm kernel_form = kernel::KernelForm::radial;

  std::size_t efron_n = 1001;
  std::size_t efron_replications = 10000;
  std::size_t efron_prediction_replications = 100000;
  std::size_t efron_oracle_replications = 100000;
  std::size_t efron_future = 1;
  std::vector<std::size_t> efron_sweep{5, 11, 31, 101, 1001};
  double efron_theta = 0.0;

  double nn_prior_mean = 0.0;
  double nn_prior_variance = 5.0;
  double nn_noise_variance = 10.0;
  double nn_true_theta = 3.0;
  std::size_t nn_n = 100;
  std::size_t nn_grid_points = 2001;
  std::size_t nn_p_points = 999;

  experiments::Dgp cov_dgp = experiments::Dgp::heteroscedastic;
  std::size_t cov_n_train = 1000;
  std::size_t cov_n_cal = 500;
  std::size_t cov_n_test = 1000;
  std::size_t cov_replications = 200;
  std::vector<std::size_t> cov_hidden{32, 32};
  double cov_learning_rate = experiments::CoverageBenchConfig::default_training().learning_rate;
  std::size_t cov_batch_size = experiments::CoverageBenchConfig::default_training().batch_size;
  std::size_t cov_epochs = experiments::CoverageBenchConfig::default_training().epochs;

  // Cross-field checks; throws InputError.
  void validate() const;

  qnn::NetworkSpec network_spec(std::size_t input_dim) const;
  qnn::TrainingConfig training_config() const;
  kernel::KernelConfig kernel_config() const;
  experiments::EfronConfig efron_config() const;
  experiments::NormalDemoConfig normal_demo_config() const;
  experiments::CoverageBenchConfig coverage_config() const;

  std::filesystem::path out_dir() const { return out; }
  std::filesystem::path resolved_model_path() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Parses INI text; unknown sections or keys, duplicates and bad values raise
// InputError with the offending line or key. Missing keys keep their defaults.
RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Full INI text for `config`, every key present; parse_config_text inverts it.
std::string echo_config(const RunConfig& config);

}  // namespace genpred::cli
