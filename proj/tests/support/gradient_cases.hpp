#pragma once

#include <string>
#include <vector>

#include "genpred/qnn.hpp"
#include "genpred/random.hpp"
#include "reference_net.hpp"

namespace cases {

struct GradientCase {
  genpred::qnn::QuantileNetwork net;
  genpred::Dataset batch;
  genpred::qnn::QuantileGrid taus;
  double kappa = 0.0;
  std::string label;
};

// Seeded (network, batch) pair cycling through head, monotone and activation
// modes, with a non-trivial standardizer. Targets are redrawn until every
// residual is at least 1e-3 away from the pinball kink.
inline GradientCase make_gradient_case(std::uint64_t seed) {
  using namespace genpred;
  using namespace genpred::qnn;
  RandomSource rng(seed);
  const std::size_t variant = seed % 6;

  NetworkSpec spec;
  spec.input_dim = 1 + rng.uniform_index(3);
  spec.hidden.clear();
  const std::size_t depth = 1 + rng.uniform_index(2);
  for (std::size_t l = 0; l < depth; ++l) spec.hidden.push_back(3 + rng.uniform_index(5));
  spec.activation = variant % 2 == 0 ? Activation::relu : Activation::tanh;
  spec.grid = QuantileGrid({0.1, 0.5, 0.9});
  if (variant < 2) {
    spec.head = HeadMode::multi_head;
    spec.monotone = MonotoneMode::increments;
  } else if (variant < 4) {
    spec.head = HeadMode::multi_head;
    spec.monotone = MonotoneMode::penalty;
    spec.penalty_weight = 0.5 + rng.uniform();
  } else {
    spec.head = HeadMode::implicit;
    spec.monotone = MonotoneMode::penalty;
    spec.embedding_dim = 4 + rng.uniform_index(6);
    spec.penalty_weight = 0.5 + rng.uniform();
  }

  QuantileNetwork net(spec, rng);
  // Penalty-mode heads start crossed more often with a wider spread.
  if (spec.monotone == MonotoneMode::penalty) {
    for (double& p : net.parameters()) p *= 2.0;
  }
  auto& sc = net.scaler();
  for (std::size_t j = 0; j < spec.input_dim; ++j) {
    sc.feature_mean[j] = rng.normal();
    sc.feature_scale[j] = 0.5 + 1.5 * rng.uniform();
  }
  sc.target_shift = rng.normal();
  sc.target_scale = 0.5 + 1.5 * rng.uniform();

  const double kappa = (seed / 6) % 3 == 2 ? 0.3 + rng.uniform() : 0.0;

  const std::size_t n = 8;
  Dataset batch(n, spec.input_dim);
  for (double& v : batch.features) v = sc.feature_mean[0] + 2.0 * rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = reference::forward(net, batch.row(i), spec.grid.levels()).q;
    for (;;) {
      const double y = q[1] + sc.target_scale * 1.5 * rng.normal();
      bool clear = true;
      for (double qk : q) clear &= std::abs(y - qk) > 1e-3;
      if (kappa > 0.0) {
        for (double qk : q) clear &= std::abs(std::abs(y - qk) - kappa) > 1e-3;
      }
      if (clear) {
        batch.targets[i] = y;
        break;
      }
    }
  }
  const std::string label = to_string(spec.head) + "/" + to_string(spec.monotone) + "/" +
                            to_string(spec.activation) + (kappa > 0.0 ? "/huber" : "/pinball");
  return {std::move(net), std::move(batch), spec.grid, kappa, label};
}

}  // namespace cases
