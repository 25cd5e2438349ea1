#pragma once

#include <span>
#include <vector>

#include "genpred/dataset.hpp"
#include "genpred/execution.hpp"

namespace genpred::kernel {

enum class KernelForm { radial, inner_product };

struct KernelConfig {
  double sigma = 0.25;
  KernelForm form = KernelForm::radial;

  void validate() const;
};

// Radial: exp(-|x - x'|^2 / (2 sigma^2)). Inner product: exp(x.x' / (2 sigma^2)).
double gaussian_kernel(std::span<const double> x, std::span<const double> x_prime,
                       const KernelConfig& config);

struct NwWeights {
  std::vector<double> weights;
  // All kernel values underflowed; the estimate falls back to the nearest row.
  bool underflow_fallback = false;
  std::size_t nearest = 0;
};

NwWeights nw_weights(const Dataset& train, std::span<const double> x, const KernelConfig& config);

// sum_i y_i K(x, x_i) / sum_i K(x, x_i).
double nw_estimate(const Dataset& train, std::span<const double> x, const KernelConfig& config);

// Estimates at every row of `queries` (row-major, train.cols wide).
std::vector<double> nw_predict(const Dataset& train, std::span<const double> queries,
                               const KernelConfig& config,
                               Execution execution = Execution::serial);

}  // namespace genpred::kernel
