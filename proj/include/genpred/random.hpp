#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace genpred {

/// Seeded random stream backed by the 64-bit Mersenne Twister (std::mt19937_64).
///
/// Only the raw 64-bit engine output is used; uniform, normal and integer
/// draws are derived here so that streams are identical across standard
/// library implementations.
///
/// Sub-streams: `substream(id)` seeds a fresh engine with
/// splitmix64(seed ^ splitmix64(id + 1)). Named streams hash the name with
/// FNV-1a 64 and use that as the id. Children never share state with the parent.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  RandomSource substream(std::uint64_t id) const;
  RandomSource substream(std::string_view name) const;

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1); never returns 0.
  double uniform_open();
  double uniform(double lo, double hi);
  // Standard normal via the Marsaglia polar method (one cached spare).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t uniform_index(std::uint64_t bound);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Well-known sub-stream ids used by the library.
namespace streams {
inline constexpr std::string_view kTraining = "training";
inline constexpr std::string_view kCalibration = "calibration";
inline constexpr std::string_view kExperiments = "experiments";
inline constexpr std::string_view kInit = "init";
}  // namespace streams

}  // namespace genpred
