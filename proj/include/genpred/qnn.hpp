#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "genpred/dataset.hpp"
#include "genpred/execution.hpp"
#include "genpred/interval.hpp"
#include "genpred/random.hpp"

namespace genpred::qnn {

/// Strictly increasing probability levels inside (0, 1).
class QuantileGrid {
 public:
  explicit QuantileGrid(std::vector<double> levels);

  static QuantileGrid default_grid();

  std::span<const double> levels() const noexcept { return levels_; }
  std::size_t size() const noexcept { return levels_.size(); }
  double operator[](std::size_t k) const { return levels_[k]; }
  // Index of `tau` in the grid, matched within `tol`.
  std::optional<std::size_t> find(double tau, double tol = 1e-12) const;
  std::string to_string() const;

  friend bool operator==(const QuantileGrid&, const QuantileGrid&) = default;

 private:
  std::vector<double> levels_;
};

enum class Activation { relu, tanh };
enum class HeadMode { multi_head, implicit };
enum class MonotoneMode { increments, penalty };

std::string to_string(Activation a);
std::string to_string(HeadMode h);
std::string to_string(MonotoneMode m);
Activation parse_activation(const std::string& s);
HeadMode parse_head_mode(const std::string& s);
MonotoneMode parse_monotone_mode(const std::string& s);

struct NetworkSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden{64, 64};
  Activation activation = Activation::relu;
  HeadMode head = HeadMode::multi_head;
  QuantileGrid grid = QuantileGrid::default_grid();  // output levels in multi-head mode
  std::size_t embedding_dim = 64;                    // cosine basis size in implicit mode
  MonotoneMode monotone = MonotoneMode::increments;
  double penalty_weight = 1.0;                       // crossing penalty in penalty mode

  void validate() const;
};

/// Per-column z-scoring of features plus an affine target map. The network
/// predicts in standardized units; outputs are mapped back with
/// q = target_shift + target_scale * raw.
struct Standardizer {
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  double target_shift = 0.0;
  double target_scale = 1.0;

  static Standardizer identity(std::size_t d);
  static Standardizer fit(const Dataset& data);
  void apply(std::span<const double> x, std::span<double> out) const;

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

// A dense layer: weight (out x in, row-major) at `offset`, bias right after.
struct DenseShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t offset = 0;
  bool activated = true;

  std::size_t weight_offset() const noexcept { return offset; }
  std::size_t bias_offset() const noexcept { return offset + in * out; }
  std::size_t size() const noexcept { return in * out + out; }
};

/// Feedforward quantile regressor with all parameters in one flat vector.
///
/// Multi-head: input -> hidden... -> K raw outputs. In increments mode raw
/// output 0 is the lowest quantile and outputs 1..K-1 pass through softplus
/// and are summed cumulatively, so predictions never cross.
///
/// Implicit: input -> hidden... -> psi (H). For each tau, the cosine features
/// cos(pi i tau), i = 0..E-1, feed a rectified H-wide layer phi; psi * phi
/// (elementwise) feeds a single linear output.
class QuantileNetwork {
 public:
  // All parameters zero.
  explicit QuantileNetwork(NetworkSpec spec);
  // Symmetric uniform fan-in initialisation: U(-1/sqrt(in), 1/sqrt(in)).
  QuantileNetwork(NetworkSpec spec, RandomSource& rng);

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  const std::vector<DenseShape>& layers() const noexcept { return layers_; }
  // Trunk layers (those applied to the input) come first.
  std::size_t trunk_layer_count() const noexcept { return trunk_layers_; }
  // d, hidden..., output width (K in multi-head mode, 1 in implicit mode).
  std::vector<std::size_t> layer_dims() const;

  std::span<double> weight(std::size_t layer);
  std::span<double> bias(std::size_t layer);
  std::span<const double> weight(std::size_t layer) const;
  std::span<const double> bias(std::size_t layer) const;

  Standardizer& scaler() noexcept { return scaler_; }
  const Standardizer& scaler() const noexcept { return scaler_; }

  // Number of quantile outputs for a request on `taus`.
  std::size_t output_count(const QuantileGrid& taus) const;

  friend bool operator==(const QuantileNetwork& a, const QuantileNetwork& b);

 private:
  void build_layers();

  NetworkSpec spec_;
  std::vector<DenseShape> layers_;
  std::size_t trunk_layers_ = 0;
  std::vector<double> params_;
  Standardizer scaler_;
};

QuantileNetwork make_network(const NetworkSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// rho_tau(u) = u (tau - 1{u < 0}).
double pinball_loss(double residual, double tau);
// max(tau u, (tau - 1) u); same value as pinball_loss.
double pinball_loss_max_form(double residual, double tau);
// |tau - 1{u < 0}| * H_kappa(u) / kappa with H the Huber function.
double quantile_huber_loss(double residual, double tau, double kappa);
// d/du of the configured loss; kappa = 0 selects pinball with slope tau at u = 0.
double loss_derivative(double residual, double tau, double kappa);
double loss_value(double residual, double tau, double kappa);

// ---------------------------------------------------------------------------
// Evaluation and training
// ---------------------------------------------------------------------------

// Quantile predictions for input x. Multi-head mode requires `taus` to be the
// network grid; implicit mode evaluates any grid.
std::vector<double> forward(const QuantileNetwork& net, std::span<const double> x,
                            const QuantileGrid& taus);
std::vector<double> forward(const QuantileNetwork& net, std::span<const double> x);

enum class Optimizer { adam };

struct TrainingConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 200;
  double huber_kappa = 0.0;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool standardize = true;
  Execution execution = Execution::serial;

  void validate() const;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

// Mean over rows and levels of the configured loss plus, in penalty mode,
// penalty_weight * mean over rows of sum_k max(0, q_k - q_{k+1})^2.
LossGradient loss_and_gradient(const QuantileNetwork& net, const Dataset& batch,
                               const QuantileGrid& taus, const TrainingConfig& config);
double loss_value(const QuantileNetwork& net, const Dataset& batch, const QuantileGrid& taus,
                  double huber_kappa);
// sum_k max(0, q_k - q_{k+1})^2 for one output vector.
double crossing_penalty(std::span<const double> quantiles);

struct TrainResult {
  QuantileNetwork net;
  std::vector<double> loss_trace;    // entry 0 before training, then one per epoch
  std::vector<double> level_losses;  // final mean pinball loss per level
};

TrainResult train(QuantileNetwork net, const Dataset& data, const QuantileGrid& taus,
                  const TrainingConfig& config);

// [q_{alpha/2}(x), q_{1-alpha/2}(x)] before any calibration.
PredictionInterval predict_interval(const QuantileNetwork& net, std::span<const double> x,
                                    double alpha);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kModelFormatVersion = 1;

void write_network(const QuantileNetwork& net, std::ostream& out);
QuantileNetwork read_network(std::istream& in);
void save_network(const QuantileNetwork& net, const std::string& path);
QuantileNetwork load_network(const std::string& path);

}  // namespace genpred::qnn
