#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace genpred {

/// n x d feature matrix (row-major) with one real target per row.
struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> features;
  std::vector<double> targets;
  std::vector<std::string> feature_names;

  Dataset() = default;
  Dataset(std::size_t n, std::size_t d);
  Dataset(std::size_t d, std::vector<double> features, std::vector<double> targets);

  std::span<const double> row(std::size_t i) const { return {features.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {features.data() + i * cols, cols}; }
  bool empty() const noexcept { return rows == 0; }

  Dataset subset(std::span<const std::size_t> indices) const;

  // Throws DomainError on shape disagreement or non-finite entries.
  void validate() const;
};

struct Split {
  Dataset first;
  Dataset second;
};

// Seeded permutation split; `first_fraction` of the rows (rounded down, at
// least one) go to `first`.
Split random_split(const Dataset& data, double first_fraction, std::uint64_t seed);

}  // namespace genpred
