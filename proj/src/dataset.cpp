#include "genpred/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "genpred/errors.hpp"
#include "genpred/random.hpp"

namespace genpred {

Dataset::Dataset(std::size_t n, std::size_t d)
    : rows(n), cols(d), features(n * d, 0.0), targets(n, 0.0) {}

Dataset::Dataset(std::size_t d, std::vector<double> feats, std::vector<double> ys)
    : rows(ys.size()), cols(d), features(std::move(feats)), targets(std::move(ys)) {
  validate();
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out(indices.size(), cols);
  out.feature_names = feature_names;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= rows) throw DomainError("Dataset::subset: row index out of range");
    std::copy_n(features.begin() + static_cast<std::ptrdiff_t>(src * cols), cols,
                out.features.begin() + static_cast<std::ptrdiff_t>(i * cols));
    out.targets[i] = targets[src];
  }
  return out;
}

void Dataset::validate() const {
  if (targets.size() != rows || features.size() != rows * cols) {
    throw DomainError("Dataset: feature matrix is " + std::to_string(features.size()) +
                      " values for " + std::to_string(rows) + " rows x " +
                      std::to_string(cols) + " columns");
  }
  if (!feature_names.empty() && feature_names.size() != cols) {
    throw DomainError("Dataset: feature name count does not match column count");
  }
  for (std::size_t i = 0; i < rows; ++i) {
    if (!std::isfinite(targets[i])) {
      throw DomainError("Dataset: non-finite target in row " + std::to_string(i));
    }
    for (std::size_t j = 0; j < cols; ++j) {
      if (!std::isfinite(features[i * cols + j])) {
        throw DomainError("Dataset: non-finite feature in row " + std::to_string(i) +
                          ", column " + std::to_string(j));
      }
    }
  }
}

Split random_split(const Dataset& data, double first_fraction, std::uint64_t seed) {
  if (data.rows < 2) throw DomainError("random_split: need at least two rows");
  if (!(first_fraction > 0.0 && first_fraction < 1.0)) {
    throw DomainError("random_split: fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(data.rows);
  std::iota(order.begin(), order.end(), 0);
  RandomSource rng = RandomSource(seed).substream(streams::kCalibration);
  rng.shuffle(std::span<std::size_t>(order));
  auto n_first = static_cast<std::size_t>(std::floor(first_fraction * static_cast<double>(data.rows)));
  n_first = std::clamp<std::size_t>(n_first, 1, data.rows - 1);
  std::span<const std::size_t> all(order);
  return {data.subset(all.first(n_first)), data.subset(all.subspan(n_first))};
}

}  // namespace genpred
