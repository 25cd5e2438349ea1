#include "genpred/conformal.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "genpred/errors.hpp"
#include "genpred/format.hpp"

namespace genpred::conformal {

namespace {
constexpr std::string_view kRecordHeader = "# genpred conformal calibration v1";
}

double nonconformity_score(double y, double lower, double upper) {
  if (lower > upper) {
    throw DomainError("nonconformity_score: lower " + format_double(lower) + " exceeds upper " +
                      format_double(upper));
  }
  return std::max(lower - y, y - upper);
}

std::uint64_t score_digest(std::span<const double> scores) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double s : scores) {
    const auto bits = std::bit_cast<std::uint64_t>(s);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

ConformalCalibration::ConformalCalibration(double alpha, std::vector<double> scores)
    : alpha_(alpha), scores_(std::move(scores)), n_(scores_.size()) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("calibration: alpha must lie in (0, 1)");
  if (scores_.empty()) throw DomainError("calibration: empty calibration set");
  qhat_ = conformal_quantile(scores_, UnitInterval(alpha), n_);
  digest_ = conformal::score_digest(scores_);
}

ConformalCalibration ConformalCalibration::from_record(double alpha, std::size_t n, double qhat,
                                                       std::uint64_t digest) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("calibration: alpha must lie in (0, 1)");
  if (n == 0) throw DomainError("calibration: n must be positive");
  if (!std::isfinite(qhat)) throw DomainError("calibration: qhat must be finite");
  ConformalCalibration cal;
  cal.alpha_ = alpha;
  cal.n_ = n;
  cal.qhat_ = qhat;
  cal.digest_ = digest;
  return cal;
}

ConformalCalibration calibrate(std::span<const CalibrationPoint> points, double alpha) {
  if (points.empty()) throw DomainError("calibrate: empty calibration set");
  std::vector<double> scores;
  scores.reserve(points.size());
  for (const auto& p : points) scores.push_back(nonconformity_score(p.y, p.lower, p.upper));
  return ConformalCalibration(alpha, std::move(scores));
}

bool collapsed(const PredictionInterval& interval, const ConformalCalibration& cal) {
  return interval.upper + cal.qhat() < interval.lower - cal.qhat();
}

PredictionInterval conformalize(const PredictionInterval& interval, const ConformalCalibration& cal) {
  PredictionInterval out{interval.lower - cal.qhat(), interval.upper + cal.qhat(),
                         1.0 - cal.alpha()};
  if (out.upper < out.lower) {
    const double mid = 0.5 * (interval.lower + interval.upper);
    out.lower = out.upper = mid;
  }
  return out;
}

CoverageSummary evaluate_coverage(std::span<const PredictionInterval> intervals,
                                  std::span<const double> y_test) {
  if (intervals.size() != y_test.size()) {
    throw DomainError("evaluate_coverage: " + std::to_string(intervals.size()) + " intervals for " +
                      std::to_string(y_test.size()) + " targets");
  }
  if (intervals.empty()) throw DomainError("evaluate_coverage: no test points");
  std::size_t hits = 0;
  double width = 0.0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (intervals[i].contains(y_test[i])) ++hits;
    width += intervals[i].width();
  }
  const double n = static_cast<double>(intervals.size());
  return {static_cast<double>(hits) / n, width / n};
}

void write_record(const ConformalCalibration& cal, std::ostream& out) {
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(cal.score_digest()));
  out << kRecordHeader << '\n'
      << "alpha=" << format_double(cal.alpha()) << '\n'
      << "n=" << cal.n() << '\n'
      << "qhat=" << format_double(cal.qhat()) << '\n'
      << "score_digest=fnv1a64:" << digest << '\n';
}

ConformalCalibration read_record(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRecordHeader) {
    throw InputError("calibration record: missing header '" + std::string(kRecordHeader) + "'");
  }
  std::map<std::string, std::string> fields;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("calibration record: malformed line '" + line + "'");
    fields[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"alpha", "n", "qhat", "score_digest"}) {
    if (!fields.contains(key)) throw InputError(std::string("calibration record: missing ") + key);
  }
  const std::string& d = fields["score_digest"];
  const std::string prefix = "fnv1a64:";
  if (d.rfind(prefix, 0) != 0) throw InputError("calibration record: unknown digest '" + d + "'");
  std::uint64_t digest = 0;
  try {
    digest = std::stoull(d.substr(prefix.size()), nullptr, 16);
  } catch (const std::exception&) {
    throw InputError("calibration record: bad digest '" + d + "'");
  }
  const double n = parse_double(fields["n"]);
  if (!(n >= 1.0) || n != std::floor(n)) throw InputError("calibration record: bad n");
  return ConformalCalibration::from_record(parse_double(fields["alpha"]),
                                           static_cast<std::size_t>(n),
                                           parse_double(fields["qhat"]), digest);
}

void save_record(const ConformalCalibration& cal, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  write_record(cal, out);
}

ConformalCalibration load_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open calibration record '" + path + "'");
  return read_record(in);
}

}  // namespace genpred::conformal
