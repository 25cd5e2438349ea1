#include "genpred/qnn.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "genpred/errors.hpp"
#include "genpred/format.hpp"

namespace genpred::qnn {

// ---------------------------------------------------------------------------
// Grid and modes
// ---------------------------------------------------------------------------

QuantileGrid::QuantileGrid(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw DomainError("QuantileGrid: at least one level required");
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    if (!(levels_[k] > 0.0 && levels_[k] < 1.0)) {
      throw DomainError("QuantileGrid: level " + format_double(levels_[k]) +
                        " is not strictly inside (0, 1)");
    }
    if (k > 0 && !(levels_[k] > levels_[k - 1])) {
      throw DomainError("QuantileGrid: levels must be strictly increasing");
    }
  }
}

QuantileGrid QuantileGrid::default_grid() { return QuantileGrid({0.05, 0.25, 0.5, 0.75, 0.95}); }

std::optional<std::size_t> QuantileGrid::find(double tau, double tol) const {
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    if (std::abs(levels_[k] - tau) <= tol) return k;
  }
  return std::nullopt;
}

std::string QuantileGrid::to_string() const {
  std::string out;
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    if (k > 0) out += ',';
    out += format_double(levels_[k]);
  }
  return out;
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }
std::string to_string(HeadMode h) { return h == HeadMode::multi_head ? "multi_head" : "implicit"; }
std::string to_string(MonotoneMode m) {
  return m == MonotoneMode::increments ? "increments" : "penalty";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw DomainError("unknown activation '" + s + "' (expected relu or tanh)");
}

HeadMode parse_head_mode(const std::string& s) {
  if (s == "multi_head") return HeadMode::multi_head;
  if (s == "implicit") return HeadMode::implicit;
  throw DomainError("unknown head mode '" + s + "' (expected multi_head or implicit)");
}

MonotoneMode parse_monotone_mode(const std::string& s) {
  if (s == "increments") return MonotoneMode::increments;
  if (s == "penalty") return MonotoneMode::penalty;
  throw DomainError("unknown monotone mode '" + s + "' (expected increments or penalty)");
}

void NetworkSpec::validate() const {
  if (input_dim == 0) throw DomainError("NetworkSpec: input dimension must be positive");
  for (std::size_t h : hidden) {
    if (h == 0) throw DomainError("NetworkSpec: hidden widths must be positive");
  }
  if (!(penalty_weight >= 0.0) || !std::isfinite(penalty_weight)) {
    throw DomainError("NetworkSpec: penalty weight must be non-negative");
  }
  if (head == HeadMode::implicit) {
    if (hidden.empty()) throw DomainError("NetworkSpec: implicit head needs a hidden layer");
    if (embedding_dim == 0) throw DomainError("NetworkSpec: embedding_dim must be >= 1");
    if (monotone == MonotoneMode::increments) {
      throw DomainError("NetworkSpec: implicit head supports only the penalty monotone mode");
    }
  }
}

// ---------------------------------------------------------------------------
// Standardizer
// ---------------------------------------------------------------------------

Standardizer Standardizer::identity(std::size_t d) {
  Standardizer s;
  s.feature_mean.assign(d, 0.0);
  s.feature_scale.assign(d, 1.0);
  return s;
}

Standardizer Standardizer::fit(const Dataset& data) {
  if (data.empty()) throw DomainError("Standardizer::fit: empty dataset");
  const std::size_t d = data.cols;
  const double n = static_cast<double>(data.rows);
  Standardizer s = identity(d);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < data.rows; ++i) mean += data.features[i * d + j];
    mean /= n;
    double var = 0.0;
    for (std::size_t i = 0; i < data.rows; ++i) {
      const double c = data.features[i * d + j] - mean;
      var += c * c;
    }
    const double sd = std::sqrt(var / n);
    s.feature_mean[j] = mean;
    s.feature_scale[j] = sd > 0.0 ? sd : 1.0;  // constant column
  }
  double mean = 0.0;
  for (double y : data.targets) mean += y;
  mean /= n;
  double var = 0.0;
  for (double y : data.targets) var += (y - mean) * (y - mean);
  const double sd = std::sqrt(var / n);
  s.target_shift = mean;
  s.target_scale = sd > 0.0 ? sd : 1.0;
  return s;
}

void Standardizer::apply(std::span<const double> x, std::span<double> out) const {
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - feature_mean[j]) / feature_scale[j];
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

QuantileNetwork::QuantileNetwork(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  build_layers();
  scaler_ = Standardizer::identity(spec_.input_dim);
}

QuantileNetwork::QuantileNetwork(NetworkSpec spec, RandomSource& rng)
    : QuantileNetwork(std::move(spec)) {
  for (const DenseShape& layer : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (std::size_t i = 0; i < layer.size(); ++i) {
      params_[layer.offset + i] = rng.uniform(-bound, bound);
    }
  }
}

void QuantileNetwork::build_layers() {
  layers_.clear();
  std::size_t offset = 0;
  auto add = [&](std::size_t in, std::size_t out, bool activated) {
    layers_.push_back({in, out, offset, activated});
    offset += in * out + out;
  };
  std::size_t prev = spec_.input_dim;
  for (std::size_t h : spec_.hidden) {
    add(prev, h, true);
    prev = h;
  }
  if (spec_.head == HeadMode::multi_head) {
    add(prev, spec_.grid.size(), false);
    trunk_layers_ = layers_.size();
  } else {
    trunk_layers_ = layers_.size();
    add(spec_.embedding_dim, prev, true);  // cosine embedding, rectified
    add(prev, 1, false);                   // output
  }
  params_.assign(offset, 0.0);
}

std::vector<std::size_t> QuantileNetwork::layer_dims() const {
  std::vector<std::size_t> dims{spec_.input_dim};
  dims.insert(dims.end(), spec_.hidden.begin(), spec_.hidden.end());
  dims.push_back(spec_.head == HeadMode::multi_head ? spec_.grid.size() : 1);
  return dims;
}

std::span<double> QuantileNetwork::weight(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return {params_.data() + l.weight_offset(), l.in * l.out};
}
std::span<double> QuantileNetwork::bias(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return {params_.data() + l.bias_offset(), l.out};
}
std::span<const double> QuantileNetwork::weight(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return {params_.data() + l.weight_offset(), l.in * l.out};
}
std::span<const double> QuantileNetwork::bias(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return {params_.data() + l.bias_offset(), l.out};
}

std::size_t QuantileNetwork::output_count(const QuantileGrid& taus) const {
  return spec_.head == HeadMode::multi_head ? spec_.grid.size() : taus.size();
}

bool operator==(const QuantileNetwork& a, const QuantileNetwork& b) {
  const auto& sa = a.spec_;
  const auto& sb = b.spec_;
  return sa.input_dim == sb.input_dim && sa.hidden == sb.hidden &&
         sa.activation == sb.activation && sa.head == sb.head && sa.grid == sb.grid &&
         sa.embedding_dim == sb.embedding_dim && sa.monotone == sb.monotone &&
         std::bit_cast<std::uint64_t>(sa.penalty_weight) ==
             std::bit_cast<std::uint64_t>(sb.penalty_weight) &&
         a.scaler_ == b.scaler_ && a.params_ == b.params_;
}

QuantileNetwork make_network(const NetworkSpec& spec, std::uint64_t seed) {
  RandomSource rng = RandomSource(seed).substream(streams::kInit);
  return QuantileNetwork(spec, rng);
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

double pinball_loss(double residual, double tau) {
  return residual * (tau - (residual < 0.0 ? 1.0 : 0.0));
}

double pinball_loss_max_form(double residual, double tau) {
  return std::max(tau * residual, (tau - 1.0) * residual);
}

double quantile_huber_loss(double residual, double tau, double kappa) {
  if (!(kappa > 0.0)) throw DomainError("quantile_huber_loss: kappa must be positive");
  const double a = std::abs(residual);
  const double huber = a <= kappa ? 0.5 * residual * residual : kappa * (a - 0.5 * kappa);
  return std::abs(tau - (residual < 0.0 ? 1.0 : 0.0)) * huber / kappa;
}

double loss_value(double residual, double tau, double kappa) {
  return kappa > 0.0 ? quantile_huber_loss(residual, tau, kappa) : pinball_loss(residual, tau);
}

double loss_derivative(double residual, double tau, double kappa) {
  const double weight = residual < 0.0 ? tau - 1.0 : tau;  // u = 0 takes the u >= 0 slope
  if (kappa <= 0.0) return weight;
  if (std::abs(residual) <= kappa) return std::abs(weight) * residual / kappa;
  return weight;
}

double crossing_penalty(std::span<const double> q) {
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < q.size(); ++k) {
    const double c = std::max(0.0, q[k] - q[k + 1]);
    total += c * c;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Forward / backward kernels
// ---------------------------------------------------------------------------

namespace {

double softplus(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }
double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// Per-thread scratch for one sample's forward and backward pass.
class Workspace {
 public:
  explicit Workspace(const QuantileNetwork& net, std::size_t outputs)
      : net_(net), spec_(net.spec()), layers_(net.layers()) {
    const std::size_t trunk = net.trunk_layer_count();
    post_.resize(trunk + 1);
    pre_.resize(trunk);
    post_[0].resize(spec_.input_dim);
    for (std::size_t l = 0; l < trunk; ++l) {
      pre_[l].resize(layers_[l].out);
      post_[l + 1].resize(layers_[l].out);
    }
    q_.resize(outputs);
    dq_.resize(outputs);
    if (spec_.head == HeadMode::implicit) {
      const std::size_t width = spec_.hidden.back();
      cos_.assign(outputs, std::vector<double>(spec_.embedding_dim));
      phi_pre_.assign(outputs, std::vector<double>(width));
      hidden_.assign(outputs, std::vector<double>(width));
      dpsi_.resize(width);
    }
    std::size_t widest = spec_.input_dim;
    for (const auto& l : layers_) widest = std::max({widest, l.in, l.out});
    delta_.resize(widest);
    delta_prev_.resize(widest);
  }

  std::span<const double> forward(std::span<const double> x, std::span<const double> taus) {
    const auto& params = net_.parameters();
    net_.scaler().apply(x, post_[0]);
    for (std::size_t l = 0; l < net_.trunk_layer_count(); ++l) {
      dense(params, layers_[l], post_[l], pre_[l]);
      activate(layers_[l].activated, pre_[l], post_[l + 1]);
    }
    const auto& top = post_.back();
    const double shift = net_.scaler().target_shift;
    const double scale = net_.scaler().target_scale;
    if (spec_.head == HeadMode::multi_head) {
      if (spec_.monotone == MonotoneMode::increments) {
        double acc = top[0];
        q_[0] = acc;
        for (std::size_t k = 1; k < q_.size(); ++k) {
          acc += softplus(top[k]);
          q_[k] = acc;
        }
      } else {
        std::copy(top.begin(), top.end(), q_.begin());
      }
    } else {
      const DenseShape& emb = layers_[net_.trunk_layer_count()];
      const DenseShape& out = layers_[net_.trunk_layer_count() + 1];
      for (std::size_t k = 0; k < taus.size(); ++k) {
        auto& c = cos_[k];
        for (std::size_t i = 0; i < c.size(); ++i) {
          c[i] = std::cos(std::numbers::pi * static_cast<double>(i) * taus[k]);
        }
        dense(params, emb, c, phi_pre_[k]);
        double o = params[out.bias_offset()];
        for (std::size_t j = 0; j < top.size(); ++j) {
          const double phi = std::max(0.0, phi_pre_[k][j]);
          hidden_[k][j] = top[j] * phi;
          o += params[out.weight_offset() + j] * hidden_[k][j];
        }
        q_[k] = o;
      }
    }
    for (double& v : q_) v = shift + scale * v;
    return q_;
  }

  // Accumulates d(sum_k dq_k * q_k)/d(params) into grad. Requires a preceding forward().
  void backward(std::span<const double> dq, std::span<double> grad) {
    const auto& params = net_.parameters();
    const double scale = net_.scaler().target_scale;
    const std::size_t trunk = net_.trunk_layer_count();
    const DenseShape& last = layers_[trunk - 1];
    std::span<double> delta(delta_.data(), last.out);

    if (spec_.head == HeadMode::multi_head) {
      const auto& top = post_.back();
      if (spec_.monotone == MonotoneMode::increments) {
        double suffix = 0.0;
        for (std::size_t k = dq.size(); k-- > 0;) {
          suffix += scale * dq[k];
          delta[k] = k == 0 ? suffix : suffix * sigmoid(top[k]);
        }
      } else {
        for (std::size_t k = 0; k < dq.size(); ++k) delta[k] = scale * dq[k];
      }
    } else {
      const auto& psi = post_.back();
      const DenseShape& emb = layers_[trunk];
      const DenseShape& out = layers_[trunk + 1];
      std::fill(dpsi_.begin(), dpsi_.end(), 0.0);
      for (std::size_t k = 0; k < dq.size(); ++k) {
        const double d_out = scale * dq[k];
        grad[out.bias_offset()] += d_out;
        for (std::size_t j = 0; j < psi.size(); ++j) {
          const double w = params[out.weight_offset() + j];
          grad[out.weight_offset() + j] += d_out * hidden_[k][j];
          const double dh = d_out * w;
          const double pre = phi_pre_[k][j];
          const double phi = std::max(0.0, pre);
          dpsi_[j] += dh * phi;
          if (pre > 0.0) {
            const double dpre = dh * psi[j];
            grad[emb.bias_offset() + j] += dpre;
            double* row = grad.data() + emb.weight_offset() + j * emb.in;
            for (std::size_t i = 0; i < emb.in; ++i) row[i] += dpre * cos_[k][i];
          }
        }
      }
      for (std::size_t j = 0; j < psi.size(); ++j) delta[j] = dpsi_[j];
    }

    // Trunk: delta holds dL/d(post-activation) of the last trunk layer.
    for (std::size_t l = trunk; l-- > 0;) {
      const DenseShape& layer = layers_[l];
      std::span<double> d(delta_.data(), layer.out);
      if (layer.activated) apply_activation_derivative(pre_[l], post_[l + 1], d);
      const auto& input = post_[l];
      for (std::size_t o = 0; o < layer.out; ++o) {
        grad[layer.bias_offset() + o] += d[o];
        double* row = grad.data() + layer.weight_offset() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) row[i] += d[o] * input[i];
      }
      if (l == 0) break;
      std::fill_n(delta_prev_.begin(), layer.in, 0.0);
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double* row = params.data() + layer.weight_offset() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) delta_prev_[i] += row[i] * d[o];
      }
      std::copy_n(delta_prev_.begin(), layer.in, delta_.begin());
    }
  }

  std::span<double> dq() { return dq_; }

 private:
  static void dense(std::span<const double> params, const DenseShape& layer,
                    std::span<const double> input, std::span<double> out) {
    const double* w = params.data() + layer.weight_offset();
    const double* b = params.data() + layer.bias_offset();
    for (std::size_t o = 0; o < layer.out; ++o) {
      double z = b[o];
      const double* row = w + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) z += row[i] * input[i];
      out[o] = z;
    }
  }

  void activate(bool activated, std::span<const double> pre, std::span<double> post) const {
    if (!activated) {
      std::copy(pre.begin(), pre.end(), post.begin());
      return;
    }
    if (spec_.activation == Activation::relu) {
      for (std::size_t i = 0; i < pre.size(); ++i) post[i] = std::max(0.0, pre[i]);
    } else {
      for (std::size_t i = 0; i < pre.size(); ++i) post[i] = std::tanh(pre[i]);
    }
  }

  void apply_activation_derivative(std::span<const double> pre, std::span<const double> post,
                                   std::span<double> d) const {
    if (spec_.activation == Activation::relu) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = pre[i] > 0.0 ? d[i] : 0.0;
    } else {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - post[i] * post[i];
    }
  }

  const QuantileNetwork& net_;
  const NetworkSpec& spec_;
  const std::vector<DenseShape>& layers_;
  std::vector<std::vector<double>> pre_;
  std::vector<std::vector<double>> post_;
  std::vector<double> q_;
  std::vector<double> dq_;
  std::vector<std::vector<double>> cos_;
  std::vector<std::vector<double>> phi_pre_;
  std::vector<std::vector<double>> hidden_;
  std::vector<double> dpsi_;
  std::vector<double> delta_;
  std::vector<double> delta_prev_;
};

const QuantileGrid& effective_grid(const QuantileNetwork& net, const QuantileGrid& taus) {
  if (net.spec().head == HeadMode::multi_head && !(taus == net.spec().grid)) {
    throw DomainError("multi-head network is fixed to grid {" + net.spec().grid.to_string() +
                      "}, requested {" + taus.to_string() + "}");
  }
  return taus;
}

void check_input(const QuantileNetwork& net, std::size_t d) {
  if (d != net.spec().input_dim) {
    throw DomainError("input has " + std::to_string(d) + " features, network expects " +
                      std::to_string(net.spec().input_dim));
  }
}

// Loss of one row; fills ws.dq() with dLoss/dq when `with_grad`.
double sample_loss(Workspace& ws, const QuantileNetwork& net, std::span<const double> x, double y,
                   std::span<const double> taus, double kappa, bool with_grad) {
  const auto q = ws.forward(x, taus);
  const double inv_k = 1.0 / static_cast<double>(q.size());
  double loss = 0.0;
  auto dq = ws.dq();
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double u = y - q[k];
    loss += loss_value(u, taus[k], kappa);
    if (with_grad) dq[k] = -loss_derivative(u, taus[k], kappa) * inv_k;
  }
  loss *= inv_k;
  if (net.spec().monotone == MonotoneMode::penalty && net.spec().penalty_weight > 0.0) {
    const double w = net.spec().penalty_weight;
    loss += w * crossing_penalty(q);
    if (with_grad) {
      for (std::size_t k = 0; k + 1 < q.size(); ++k) {
        const double c = q[k] - q[k + 1];
        if (c > 0.0) {
          dq[k] += 2.0 * w * c;
          dq[k + 1] -= 2.0 * w * c;
        }
      }
    }
  }
  return loss;
}

}  // namespace

std::vector<double> forward(const QuantileNetwork& net, std::span<const double> x,
                            const QuantileGrid& taus) {
  check_input(net, x.size());
  const QuantileGrid& grid = effective_grid(net, taus);
  Workspace ws(net, net.output_count(grid));
  const auto q = ws.forward(x, grid.levels());
  return {q.begin(), q.end()};
}

std::vector<double> forward(const QuantileNetwork& net, std::span<const double> x) {
  if (net.spec().head == HeadMode::implicit) {
    throw DomainError("forward: implicit network needs explicit quantile levels");
  }
  return forward(net, x, net.spec().grid);
}

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw DomainError("TrainingConfig: learning_rate must be positive");
  }
  if (batch_size == 0) throw DomainError("TrainingConfig: batch_size must be positive");
  if (epochs == 0) throw DomainError("TrainingConfig: epochs must be >= 1");
  if (!(huber_kappa >= 0.0)) throw DomainError("TrainingConfig: huber_kappa must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw DomainError("TrainingConfig: invalid optimizer coefficients");
  }
}

namespace {
constexpr std::size_t kGradientChunk = 32;
}

LossGradient loss_and_gradient(const QuantileNetwork& net, const Dataset& batch,
                               const QuantileGrid& taus, const TrainingConfig& config) {
  if (batch.empty()) throw DomainError("loss_and_gradient: empty batch");
  check_input(net, batch.cols);
  const QuantileGrid& grid = effective_grid(net, taus);
  const std::size_t n = batch.rows;
  const std::size_t p = net.parameter_count();
  const std::size_t outputs = net.output_count(grid);
  const double kappa = config.huber_kappa;

  LossGradient result;
  result.gradient.assign(p, 0.0);
  std::vector<double> losses(n);

  // Rows are accumulated in fixed chunks and the chunks summed in index order,
  // so both paths share one reduction tree.
  const std::size_t chunks = (n + kGradientChunk - 1) / kGradientChunk;
  std::vector<double> chunk_grads(chunks * p, 0.0);
  auto run_chunk = [&](Workspace& ws, std::size_t c) {
    const std::span<double> g(chunk_grads.data() + c * p, p);
    const std::size_t end = std::min(n, (c + 1) * kGradientChunk);
    for (std::size_t i = c * kGradientChunk; i < end; ++i) {
      losses[i] = sample_loss(ws, net, batch.row(i), batch.targets[i], grid.levels(), kappa, true);
      ws.backward(ws.dq(), g);
    }
  };
  if (config.execution == Execution::serial) {
    Workspace ws(net, outputs);
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(ws, c);
  } else {
#pragma omp parallel
    {
      Workspace ws(net, outputs);
#pragma omp for schedule(static)
      for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        run_chunk(ws, static_cast<std::size_t>(c));
      }
    }
  }
  for (std::size_t c = 0; c < chunks; ++c) {
    const double* g = chunk_grads.data() + c * p;
    for (std::size_t j = 0; j < p; ++j) result.gradient[j] += g[j];
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (double l : losses) total += l;
  result.loss = total * inv_n;
  for (double& g : result.gradient) g *= inv_n;
  return result;
}

double loss_value(const QuantileNetwork& net, const Dataset& batch, const QuantileGrid& taus,
                  double huber_kappa) {
  if (batch.empty()) throw DomainError("loss_value: empty batch");
  check_input(net, batch.cols);
  const QuantileGrid& grid = effective_grid(net, taus);
  Workspace ws(net, net.output_count(grid));
  double total = 0.0;
  for (std::size_t i = 0; i < batch.rows; ++i) {
    total += sample_loss(ws, net, batch.row(i), batch.targets[i], grid.levels(), huber_kappa, false);
  }
  return total / static_cast<double>(batch.rows);
}

TrainResult train(QuantileNetwork net, const Dataset& data, const QuantileGrid& taus,
                  const TrainingConfig& config) {
  config.validate();
  if (data.empty()) throw DomainError("train: empty dataset");
  data.validate();
  check_input(net, data.cols);
  const QuantileGrid& grid = effective_grid(net, taus);

  if (config.standardize) net.scaler() = Standardizer::fit(data);

  TrainResult result{net, {}, {}};
  QuantileNetwork& model = result.net;
  const std::size_t p = model.parameter_count();
  std::vector<double> m(p, 0.0);
  std::vector<double> v(p, 0.0);
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  RandomSource rng = RandomSource(config.seed).substream(streams::kTraining);
  std::vector<std::size_t> order(data.rows);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::min(config.batch_size, data.rows);

  result.loss_trace.push_back(loss_value(model, data, grid, config.huber_kappa));
  if (!std::isfinite(result.loss_trace.back())) {
    throw TrainingError("non-finite initial loss", 0, 0);
  }

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < data.rows; start += batch, ++batch_index) {
      const std::size_t stop = std::min(start + batch, data.rows);
      const Dataset mini =
          data.subset(std::span<const std::size_t>(order).subspan(start, stop - start));
      const LossGradient lg = loss_and_gradient(model, mini, grid, config);
      if (!std::isfinite(lg.loss)) throw TrainingError("non-finite loss", epoch, batch_index);

      beta1_t *= config.beta1;
      beta2_t *= config.beta2;
      auto params = model.parameters();
      for (std::size_t j = 0; j < p; ++j) {
        const double g = lg.gradient[j];
        if (!std::isfinite(g)) throw TrainingError("non-finite gradient", epoch, batch_index);
        m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g;
        v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g * g;
        const double m_hat = m[j] / (1.0 - beta1_t);
        const double v_hat = v[j] / (1.0 - beta2_t);
        params[j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
      }
    }
    const double epoch_loss = loss_value(model, data, grid, config.huber_kappa);
    if (!std::isfinite(epoch_loss)) throw TrainingError("non-finite epoch loss", epoch, batch_index);
    result.loss_trace.push_back(epoch_loss);
  }

  // Per-level pinball loss on the training data.
  result.level_losses.assign(grid.size(), 0.0);
  for (std::size_t i = 0; i < data.rows; ++i) {
    const auto q = forward(model, data.row(i), grid);
    for (std::size_t k = 0; k < q.size(); ++k) {
      result.level_losses[k] += pinball_loss(data.targets[i] - q[k], grid[k]);
    }
  }
  for (double& l : result.level_losses) l /= static_cast<double>(data.rows);
  return result;
}

PredictionInterval predict_interval(const QuantileNetwork& net, std::span<const double> x,
                                    double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("predict_interval: alpha must lie in (0, 1)");
  const double lo_tau = alpha / 2.0;
  const double hi_tau = 1.0 - alpha / 2.0;
  double lower = 0.0;
  double upper = 0.0;
  if (net.spec().head == HeadMode::multi_head) {
    const auto& grid = net.spec().grid;
    const auto lo = grid.find(lo_tau, 1e-9);
    const auto hi = grid.find(hi_tau, 1e-9);
    if (!lo || !hi) {
      throw DomainError("predict_interval: levels " + format_double(lo_tau) + " and " +
                        format_double(hi_tau) + " not in model grid {" + grid.to_string() + "}");
    }
    const auto q = forward(net, x, grid);
    lower = q[*lo];
    upper = q[*hi];
  } else if (lo_tau == hi_tau) {
    lower = upper = forward(net, x, QuantileGrid({lo_tau}))[0];
  } else {
    const auto q = forward(net, x, QuantileGrid({lo_tau, hi_tau}));
    lower = q[0];
    upper = q[1];
  }
  // Penalty-mode networks can cross; report the ordered pair.
  if (lower > upper) std::swap(lower, upper);
  return {lower, upper, 1.0 - alpha};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'G', 'P', 'Q', 'N', 'E', 'T', '\r', '\n'};

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::ostream& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw InputError("model file: truncated header");
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

double get_f64(std::istream& in) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw InputError("model file: truncated parameter block");
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

// Layout: 8-byte magic, u32 version, u32 header length, JSON header, then
// little-endian float64 blocks in the order listed under "blocks".
void write_network(const QuantileNetwork& net, std::ostream& out) {
  const auto& spec = net.spec();
  nlohmann::ordered_json header;
  header["format"] = "genpred-qnn";
  header["version"] = kModelFormatVersion;
  header["layer_dims"] = net.layer_dims();
  header["input_dim"] = spec.input_dim;
  header["hidden"] = spec.hidden;
  header["activation"] = to_string(spec.activation);
  header["head"] = to_string(spec.head);
  header["monotone"] = to_string(spec.monotone);
  header["embedding_dim"] = spec.embedding_dim;
  header["grid_size"] = spec.grid.size();
  header["parameter_count"] = net.parameter_count();
  header["blocks"] = {"grid", "feature_mean", "feature_scale", "target_shift", "target_scale",
                      "penalty_weight", "parameters"};
  const std::string text = header.dump();

  out.write(kMagic, sizeof kMagic);
  put_u32(out, kModelFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double t : spec.grid.levels()) put_f64(out, t);
  for (double v : net.scaler().feature_mean) put_f64(out, v);
  for (double v : net.scaler().feature_scale) put_f64(out, v);
  put_f64(out, net.scaler().target_shift);
  put_f64(out, net.scaler().target_scale);
  put_f64(out, spec.penalty_weight);
  for (double v : net.parameters()) put_f64(out, v);
  if (!out) throw InputError("model file: write failed");
}

QuantileNetwork read_network(std::istream& in) {
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (in.gcount() != sizeof magic || !std::equal(magic, magic + sizeof magic, kMagic)) {
    throw InputError("model file: bad magic (not a genpred model)");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kModelFormatVersion) {
    throw InputError("model file: unsupported version " + std::to_string(version));
  }
  const std::uint32_t length = get_u32(in);
  std::string text(length, '\0');
  in.read(text.data(), length);
  if (static_cast<std::uint32_t>(in.gcount()) != length) throw InputError("model file: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model file: malformed header: ") + e.what());
  }
  NetworkSpec spec;
  try {
    spec.input_dim = header.at("input_dim").get<std::size_t>();
    spec.hidden = header.at("hidden").get<std::vector<std::size_t>>();
    spec.activation = parse_activation(header.at("activation").get<std::string>());
    spec.head = parse_head_mode(header.at("head").get<std::string>());
    spec.monotone = parse_monotone_mode(header.at("monotone").get<std::string>());
    spec.embedding_dim = header.at("embedding_dim").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model file: header field: ") + e.what());
  }
  const auto grid_size = header.at("grid_size").get<std::size_t>();
  std::vector<double> levels(grid_size);
  for (double& t : levels) t = get_f64(in);
  spec.grid = QuantileGrid(std::move(levels));

  Standardizer scaler = Standardizer::identity(spec.input_dim);
  for (double& v : scaler.feature_mean) v = get_f64(in);
  for (double& v : scaler.feature_scale) v = get_f64(in);
  scaler.target_shift = get_f64(in);
  scaler.target_scale = get_f64(in);
  spec.penalty_weight = get_f64(in);

  QuantileNetwork net(spec);
  if (header.at("parameter_count").get<std::size_t>() != net.parameter_count()) {
    throw InputError("model file: parameter count does not match the declared architecture");
  }
  net.scaler() = std::move(scaler);
  for (double& v : net.parameters()) v = get_f64(in);
  return net;
}

void save_network(const QuantileNetwork& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  write_network(net, out);
}

QuantileNetwork load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file '" + path + "'");
  return read_network(in);
}

}  // namespace genpred::qnn
