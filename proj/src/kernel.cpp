#include "genpred/kernel.hpp"

#include <omp.h>

#include <cmath>
#include <iostream>
#include <limits>

#include "genpred/errors.hpp"

namespace genpred::kernel {

void KernelConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("kernel bandwidth must be positive");
}

double gaussian_kernel(std::span<const double> x, std::span<const double> x_prime,
                       const KernelConfig& config) {
  config.validate();
  if (x.size() != x_prime.size()) {
    throw DomainError("gaussian_kernel: dimensions " + std::to_string(x.size()) + " and " +
                      std::to_string(x_prime.size()) + " differ");
  }
  const double two_s2 = 2.0 * config.sigma * config.sigma;
  double acc = 0.0;
  if (config.form == KernelForm::radial) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - x_prime[i];
      acc += d * d;
    }
    return std::exp(-acc / two_s2);
  }
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * x_prime[i];
  return std::exp(acc / two_s2);
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

NwWeights nw_weights(const Dataset& train, std::span<const double> x, const KernelConfig& config) {
  config.validate();
  if (train.empty()) throw DomainError("nw_estimate: empty training set");
  if (x.size() != train.cols) throw DomainError("nw_estimate: query dimension mismatch");
  NwWeights out;
  out.weights.resize(train.rows);
  double total = 0.0;
  for (std::size_t i = 0; i < train.rows; ++i) {
    out.weights[i] = gaussian_kernel(x, train.row(i), config);
    total += out.weights[i];
  }
  if (total < std::numeric_limits<double>::min()) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < train.rows; ++i) {
      const double d = squared_distance(x, train.row(i));
      if (d < best) {
        best = d;
        out.nearest = i;
      }
    }
    std::fill(out.weights.begin(), out.weights.end(), 0.0);
    out.weights[out.nearest] = 1.0;
    out.underflow_fallback = true;
    return out;
  }
  for (double& w : out.weights) w /= total;
  return out;
}

double nw_estimate(const Dataset& train, std::span<const double> x, const KernelConfig& config) {
  const NwWeights w = nw_weights(train, x, config);
  if (w.underflow_fallback) {
    std::cerr << "genpred: kernel weights underflowed at bandwidth " << config.sigma
              << "; using nearest training row " << w.nearest << '\n';
    return train.targets[w.nearest];
  }
  double estimate = 0.0;
  for (std::size_t i = 0; i < train.rows; ++i) estimate += w.weights[i] * train.targets[i];
  return estimate;
}

std::vector<double> nw_predict(const Dataset& train, std::span<const double> queries,
                               const KernelConfig& config, Execution execution) {
  config.validate();
  if (train.cols == 0 || queries.size() % train.cols != 0) {
    throw DomainError("nw_predict: query matrix width does not match training data");
  }
  const std::size_t m = queries.size() / train.cols;
  std::vector<double> out(m);
  auto query = [&](std::size_t q) { return queries.subspan(q * train.cols, train.cols); };
  if (execution == Execution::serial) {
    for (std::size_t q = 0; q < m; ++q) out[q] = nw_estimate(train, query(q), config);
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t q = 0; q < static_cast<std::ptrdiff_t>(m); ++q) {
      out[static_cast<std::size_t>(q)] = nw_estimate(train, query(static_cast<std::size_t>(q)), config);
    }
  }
  return out;
}

}  // namespace genpred::kernel
