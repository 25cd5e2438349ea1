#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "genpred/interval.hpp"
#include "genpred/numerics.hpp"

namespace genpred::conformal {

// max(lower - y, y - upper): negative inside the band, distance outside it.
double nonconformity_score(double y, double lower, double upper);

struct CalibrationPoint {
  double y = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Scores of a calibration split and the inflation constant derived from them.
class ConformalCalibration {
 public:
  ConformalCalibration(double alpha, std::vector<double> scores);
  // Restores a record without scores (as read back from a calibration file).
  static ConformalCalibration from_record(double alpha, std::size_t n, double qhat,
                                          std::uint64_t digest);

  double alpha() const noexcept { return alpha_; }
  double qhat() const noexcept { return qhat_; }
  std::size_t n() const noexcept { return n_; }
  std::span<const double> scores() const noexcept { return scores_; }
  std::uint64_t score_digest() const noexcept { return digest_; }

 private:
  ConformalCalibration() = default;

  double alpha_ = 0.0;
  std::vector<double> scores_;
  double qhat_ = 0.0;
  std::size_t n_ = 0;
  std::uint64_t digest_ = 0;
};

ConformalCalibration calibrate(std::span<const CalibrationPoint> points, double alpha);

// [lower - qhat, upper + qhat]; collapses to the midpoint when a negative qhat
// would invert the interval.
PredictionInterval conformalize(const PredictionInterval& interval, const ConformalCalibration& cal);
bool collapsed(const PredictionInterval& interval, const ConformalCalibration& cal);

struct CoverageSummary {
  double coverage = 0.0;
  double mean_width = 0.0;
};

// Closed-interval membership.
CoverageSummary evaluate_coverage(std::span<const PredictionInterval> intervals,
                                  std::span<const double> y_test);

// FNV-1a 64 over the little-endian bytes of the scores, in order.
std::uint64_t score_digest(std::span<const double> scores);

// Text record: header line plus alpha, n, qhat (round-trip precision) and digest.
void write_record(const ConformalCalibration& cal, std::ostream& out);
ConformalCalibration read_record(std::istream& in);
void save_record(const ConformalCalibration& cal, const std::string& path);
ConformalCalibration load_record(const std::string& path);

}  // namespace genpred::conformal
