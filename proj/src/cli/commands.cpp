#include "genpred/cli/commands.hpp"

#include <cmath>
#include <functional>

#include "genpred/cli/io.hpp"
#include "genpred/conformal.hpp"
#include "genpred/errors.hpp"
#include "genpred/format.hpp"
#include "genpred/kernel.hpp"
#include "genpred/qnn.hpp"

namespace genpred::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string to_string(Demo d) {
  switch (d) {
    case Demo::normal_normal: return "normal-normal";
    case Demo::efron: return "efron";
    case Demo::coverage: return "coverage";
  }
  return "?";
}

Demo parse_demo(const std::string& s) {
  if (s == "normal-normal") return Demo::normal_normal;
  if (s == "efron") return Demo::efron;
  if (s == "coverage") return Demo::coverage;
  throw InputError("unknown demo '" + s + "' (expected normal-normal, efron or coverage)");
}

namespace {

// Collects output files and writes the JSON sidecar last.
class Outputs {
 public:
  Outputs(const RunConfig& config, std::string command)
      : config_(config), command_(std::move(command)), dir_(config.out_dir()) {
    fs::create_directories(dir_);
  }

  fs::path path(const std::string& name) {
    names_.push_back(name);
    result_.files.push_back(dir_ / name);
    return dir_ / name;
  }

  ordered_json& meta() { return meta_; }

  CommandOutput finish(const std::string& sidecar, std::string summary) {
    ordered_json doc;
    doc["tool"] = "genpred";
    doc["version"] = kVersion;
    doc["command"] = command_;
    doc["config"] = echo_config(config_);
    doc["outputs"] = names_;
    for (auto& [k, v] : meta_.items()) doc[k] = v;
    write_json(path(sidecar), doc);
    result_.summary = std::move(summary);
    return result_;
  }

 private:
  const RunConfig& config_;
  std::string command_;
  fs::path dir_;
  std::vector<std::string> names_;
  ordered_json meta_ = ordered_json::object();
  CommandOutput result_;
};

void require(const std::string& value, const std::string& what) {
  if (value.empty()) throw InputError("missing " + what);
}

Dataset training_part(const RunConfig& config) {
  require(config.data_path, "training data ([data] path or --data)");
  Dataset data = ingest_csv(config.data_path, config.target);
  if (!config.calibration_data_path.empty()) return data;
  return random_split(data, config.train_fraction, config.seed).first;
}

Dataset calibration_part(const RunConfig& config) {
  if (!config.calibration_data_path.empty()) {
    return ingest_csv(config.calibration_data_path, config.target);
  }
  require(config.data_path, "data ([data] path or --data)");
  Dataset data = ingest_csv(config.data_path, config.target);
  return random_split(data, config.train_fraction, config.seed).second;
}

std::string level_name(double tau) { return "q" + format_double(tau); }

// Raw interval and point summaries for either method.
class Predictor {
 public:
  explicit Predictor(const RunConfig& config) : config_(config) {
    if (config.method == Method::qnn) {
      net_.emplace(qnn::load_network(config.resolved_model_path().string()));
    } else {
      train_ = training_part(config);
    }
  }

  std::size_t input_dim() const { return net_ ? net_->spec().input_dim : train_.cols; }

  void check_dim(const Dataset& data, const std::string& source) const {
    if (data.cols != input_dim()) {
      throw InputError(source + ": expected " + std::to_string(input_dim()) +
                       " feature columns, found " + std::to_string(data.cols));
    }
  }

  // The requested levels; multi-head models must contain every one of them.
  qnn::QuantileGrid levels() const {
    qnn::QuantileGrid requested(config_.taus);
    if (!net_ || net_->spec().head == qnn::HeadMode::implicit) return requested;
    const auto& grid = net_->spec().grid;
    for (double tau : requested.levels()) {
      if (!grid.find(tau, 1e-9)) {
        throw InputError("level " + format_double(tau) + " not available; model levels are {" +
                         grid.to_string() + "}");
      }
    }
    return requested;
  }

  std::vector<double> quantiles(std::span<const double> x, const qnn::QuantileGrid& taus) const {
    if (net_->spec().head == qnn::HeadMode::implicit) return qnn::forward(*net_, x, taus);
    const auto& grid = net_->spec().grid;
    const auto all = qnn::forward(*net_, x, grid);
    std::vector<double> out;
    for (double tau : taus.levels()) out.push_back(all[*grid.find(tau, 1e-9)]);
    return out;
  }

  std::vector<PredictionInterval> intervals(const Dataset& data) const {
    std::vector<PredictionInterval> out(data.rows);
    if (net_) {
      for (std::size_t i = 0; i < data.rows; ++i) {
        try {
          out[i] = qnn::predict_interval(*net_, data.row(i), config_.alpha);
        } catch (const DomainError& e) {
          throw InputError(e.what());
        }
      }
      return out;
    }
    const auto mean = kernel::nw_predict(train_, data.features, config_.kernel_config());
    for (std::size_t i = 0; i < data.rows; ++i) out[i] = {mean[i], mean[i], 1.0 - config_.alpha};
    return out;
  }

  bool is_qnn() const { return net_.has_value(); }

 private:
  const RunConfig& config_;
  std::optional<qnn::QuantileNetwork> net_;
  Dataset train_;
};

std::optional<conformal::ConformalCalibration> load_calibration(const RunConfig& config) {
  if (config.calibration_path.empty()) return std::nullopt;
  auto cal = conformal::load_record(config.calibration_path);
  if (std::abs(cal.alpha() - config.alpha) > 1e-12) {
    throw InputError(config.calibration_path + ": calibrated for alpha " + format_double(cal.alpha()) +
                     " but alpha is " + format_double(config.alpha));
  }
  return cal;
}

CommandOutput demo_normal_normal(const RunConfig& config) {
  Outputs out(config, "demo normal-normal");
  const auto report = experiments::run_normal_normal_demo(config.normal_demo_config());
  const auto& post = report.posterior;

  std::vector<std::vector<double>> data_rows;
  for (double y : report.data) data_rows.push_back({y});
  write_numeric_csv(out.path("normal_normal_data.csv"), {"y"}, data_rows);

  const std::string nan = "";
  write_csv(out.path("normal_normal_summary.csv"), {"quantity", "value", "reported"},
            {{"y_bar", format_double(report.y_bar), nan},
             {"mu_star", format_double(post.mu_star), format_double(experiments::kReportedPosteriorMean)},
             {"sigma2_star", format_double(post.sigma2_star),
              format_double(experiments::kReportedPosteriorSecond)},
             {"sigma_star", format_double(post.sigma_star()), nan},
             {"t", format_double(post.t), nan},
             {"lambda1", format_double(report.distortion.lambda1), nan},
             {"lambda", format_double(report.distortion.lambda), nan},
             {"max_identity_error", format_double(report.max_identity_error), nan}});
  write_numeric_csv(out.path("normal_normal_densities.csv"), report.densities.columns, report.densities.rows);
  write_numeric_csv(out.path("normal_normal_distortion.csv"), report.distortion_curve.columns,
                    report.distortion_curve.rows);
  write_numeric_csv(out.path("normal_normal_survival.csv"), report.survival.columns, report.survival.rows);

  out.meta()["identity_tolerance"] = 1e-10;
  out.meta()["identity_holds"] = report.max_identity_error <= 1e-10;
  out.meta()["reported_second_parameter_reproduced"] = report.variance_matches_reported;
  out.meta()["discrepancy_note"] = report.discrepancy_note;
  return out.finish("normal_normal.json",
                    "y_bar " + format_double(report.y_bar) + ", mu* " + format_double(post.mu_star) +
                        ", sigma*^2 " + format_double(post.sigma2_star) + ", identity error " +
                        format_double(report.max_identity_error) + "\n" + report.discrepancy_note);
}

CommandOutput demo_efron(const RunConfig& config) {
  Outputs out(config, "demo efron");
  const auto base = config.efron_config();
  const auto est = experiments::efron_estimation_ratio(base);
  const double half_pi = std::acos(-1.0) / 2.0;
  write_csv(out.path("efron_estimation.csv"), {"n", "replications", "ratio", "se", "pi_over_2"},
            {{std::to_string(base.n), std::to_string(base.replications), format_double(est.value),
              format_double(est.se), format_double(half_pi)}});

  auto prediction = base;
  prediction.replications = config.efron_prediction_replications;
  const auto sweep = experiments::efron_prediction_sweep(config.efron_sweep, prediction,
                                                         config.efron_oracle_replications);
  std::vector<CsvRow> rows;
  ordered_json near;
  for (const auto& r : sweep) {
    const double z = (r.ratio.value - r.comparator.value) /
                     std::sqrt(r.ratio.se * r.ratio.se + r.comparator.se * r.comparator.se);
    rows.push_back({std::to_string(r.n), std::to_string(prediction.future), format_double(r.ratio.value),
                    format_double(r.ratio.se), format_double(r.median_variance.value),
                    format_double(r.median_variance.se), format_double(r.rho),
                    format_double(r.comparator.value), format_double(r.comparator.se),
                    format_double(z)});
    if (r.ratio.value >= 1.015 && r.ratio.value <= 1.03) near.push_back(r.n);
  }
  write_csv(out.path("efron_prediction.csv"),
            {"n", "future", "ratio", "se", "median_variance", "median_variance_se", "rho",
             "comparator", "comparator_se", "z"},
            rows);
  out.meta()["estimation_z_vs_pi_over_2"] = (est.value - half_pi) / est.se;
  out.meta()["prediction_n_with_ratio_near_1_02"] = near.is_null() ? ordered_json::array() : near;
  return out.finish("efron.json", "estimation ratio " + format_double(est.value) + " (se " +
                                      format_double(est.se) + ")");
}

CommandOutput demo_coverage(const RunConfig& config) {
  Outputs out(config, "demo coverage");
  const auto result = experiments::run_coverage_bench(config.coverage_config());
  std::vector<CsvRow> rows;
  for (const auto& m : result.methods) {
    rows.push_back({m.method, format_double(m.coverage.value), format_double(m.coverage.se),
                    format_double(m.width.value), format_double(m.width.se)});
  }
  write_csv(out.path("coverage.csv"), {"method", "coverage", "coverage_se", "width", "width_se"}, rows);

  std::vector<CsvRow> reps;
  for (std::size_t r = 0; r < result.replications.size(); ++r) {
    const auto& rep = result.replications[r];
    reps.push_back({std::to_string(r), rep.ok ? "ok" : "failed", format_double(rep.qnn_coverage),
                    format_double(rep.qnn_width), format_double(rep.cqr_coverage),
                    format_double(rep.cqr_width), format_double(rep.nw_coverage),
                    format_double(rep.nw_width), format_double(rep.qhat),
                    format_double(rep.cqr_width_inner), format_double(rep.cqr_width_outer)});
  }
  write_csv(out.path("coverage_replications.csv"),
            {"replication", "status", "qnn_coverage", "qnn_width", "cqr_coverage", "cqr_width",
             "nw_coverage", "nw_width", "qhat", "cqr_width_inner", "cqr_width_outer"},
            reps);
  out.meta()["failures"] = result.failures;
  out.meta()["cqr_width_inner"] = {{"value", result.cqr_width_inner.value}, {"se", result.cqr_width_inner.se}};
  out.meta()["cqr_width_outer"] = {{"value", result.cqr_width_outer.value}, {"se", result.cqr_width_outer.se}};
  ordered_json errors = ordered_json::array();
  for (std::size_t r = 0; r < result.replications.size(); ++r) {
    if (!result.replications[r].ok) errors.push_back({{"replication", r}, {"error", result.replications[r].error}});
  }
  out.meta()["failed_replications"] = errors;
  const auto& cqr = result.methods[1];
  return out.finish("coverage.json", "cqr coverage " + format_double(cqr.coverage.value) + ", width " +
                                         format_double(cqr.width.value) + ", failures " +
                                         std::to_string(result.failures));
}

}  // namespace

CommandOutput cmd_train(const RunConfig& config) {
  config.validate();
  if (config.method != Method::qnn) {
    throw InputError("method kernel has no training step; calibrate and predict fit it from [data] path");
  }
  const Dataset data = training_part(config);
  Outputs out(config, "train");
  const auto spec = config.network_spec(data.cols);
  const qnn::TrainResult result =
      qnn::train(qnn::make_network(spec, config.seed), data, spec.grid, config.training_config());
  const fs::path model = config.model_path.empty() ? out.path("model.gpq") : fs::path(config.model_path);
  qnn::save_network(result.net, model.string());

  std::vector<CsvRow> levels;
  for (std::size_t k = 0; k < spec.grid.size(); ++k) {
    levels.push_back({format_double(spec.grid[k]), format_double(result.level_losses[k])});
  }
  write_csv(out.path("train_report.csv"), {"tau", "final_pinball_loss"}, levels);
  std::vector<std::vector<double>> trace;
  for (std::size_t e = 0; e < result.loss_trace.size(); ++e) {
    trace.push_back({static_cast<double>(e), result.loss_trace[e]});
  }
  write_numeric_csv(out.path("loss_trace.csv"), {"epoch", "loss"}, trace);
  out.meta()["n_train"] = data.rows;
  out.meta()["model"] = model.string();
  out.meta()["final_loss"] = result.loss_trace.back();
  return out.finish("train.json", "trained on " + std::to_string(data.rows) + " rows, final loss " +
                                      format_double(result.loss_trace.back()));
}

CommandOutput cmd_calibrate(const RunConfig& config) {
  config.validate();
  const Predictor predictor(config);
  const Dataset cal = calibration_part(config);
  predictor.check_dim(cal, "calibration data");
  const auto iv = predictor.intervals(cal);
  std::vector<conformal::CalibrationPoint> points(cal.rows);
  for (std::size_t i = 0; i < cal.rows; ++i) points[i] = {cal.targets[i], iv[i].lower, iv[i].upper};
  const auto calibration = conformal::calibrate(points, config.alpha);

  Outputs out(config, "calibrate");
  conformal::save_record(calibration, out.path("calibration.txt").string());
  std::vector<std::vector<double>> scores;
  for (double s : calibration.scores()) scores.push_back({s});
  write_numeric_csv(out.path("calibration_scores.csv"), {"score"}, scores);
  out.meta()["n_cal"] = calibration.n();
  out.meta()["qhat"] = calibration.qhat();
  return out.finish("calibrate.json", "qhat " + format_double(calibration.qhat()) + " from " +
                                          std::to_string(calibration.n()) + " scores");
}

CommandOutput cmd_predict(const RunConfig& config) {
  config.validate();
  require(config.input_path, "input rows ([data] input or --input)");
  const Predictor predictor(config);
  const Dataset input = ingest_features(config.input_path, config.target);
  predictor.check_dim(input, config.input_path);
  const auto calibration = load_calibration(config);
  const auto iv = predictor.intervals(input);

  CsvRow header{"row"};
  std::optional<qnn::QuantileGrid> levels;
  if (predictor.is_qnn()) {
    levels = predictor.levels();
    for (double tau : levels->levels()) header.push_back(level_name(tau));
  } else {
    header.push_back("mean");
  }
  header.insert(header.end(), {"lower", "upper"});
  if (calibration) header.insert(header.end(), {"calibrated_lower", "calibrated_upper"});

  std::vector<CsvRow> rows(input.rows);
  for (std::size_t i = 0; i < input.rows; ++i) {
    auto& row = rows[i];
    row.push_back(std::to_string(i));
    if (levels) {
      for (double q : predictor.quantiles(input.row(i), *levels)) row.push_back(format_double(q));
    } else {
      row.push_back(format_double(iv[i].lower));
    }
    row.push_back(format_double(iv[i].lower));
    row.push_back(format_double(iv[i].upper));
    if (calibration) {
      const auto c = conformal::conformalize(iv[i], *calibration);
      row.push_back(format_double(c.lower));
      row.push_back(format_double(c.upper));
    }
  }
  Outputs out(config, "predict");
  write_csv(out.path("predictions.csv"), header, rows);
  out.meta()["rows"] = input.rows;
  out.meta()["calibrated"] = calibration.has_value();
  return out.finish("predict.json", "predicted " + std::to_string(input.rows) + " rows");
}

CommandOutput cmd_eval(const RunConfig& config) {
  config.validate();
  require(config.input_path, "labelled rows ([data] input or --input)");
  const Predictor predictor(config);
  const Dataset test = ingest_csv(config.input_path, config.target);
  predictor.check_dim(test, config.input_path);
  const auto calibration = load_calibration(config);
  const auto iv = predictor.intervals(test);

  std::vector<CsvRow> rows;
  auto add = [&](const std::string& metric, double value) {
    rows.push_back({metric, format_double(value)});
  };
  add("n", static_cast<double>(test.rows));
  const auto raw = conformal::evaluate_coverage(iv, test.targets);
  add("coverage", raw.coverage);
  add("mean_width", raw.mean_width);
  if (calibration) {
    std::vector<PredictionInterval> adjusted(iv.size());
    for (std::size_t i = 0; i < iv.size(); ++i) adjusted[i] = conformal::conformalize(iv[i], *calibration);
    const auto cal = conformal::evaluate_coverage(adjusted, test.targets);
    add("calibrated_coverage", cal.coverage);
    add("calibrated_mean_width", cal.mean_width);
  }
  if (predictor.is_qnn()) {
    const auto levels = predictor.levels();
    std::vector<double> loss(levels.size(), 0.0);
    for (std::size_t i = 0; i < test.rows; ++i) {
      const auto q = predictor.quantiles(test.row(i), levels);
      for (std::size_t k = 0; k < levels.size(); ++k) {
        loss[k] += qnn::pinball_loss(test.targets[i] - q[k], levels[k]);
      }
    }
    for (std::size_t k = 0; k < levels.size(); ++k) {
      add("pinball_" + level_name(levels[k]), loss[k] / static_cast<double>(test.rows));
    }
  }
  Outputs out(config, "eval");
  write_csv(out.path("eval.csv"), {"metric", "value"}, rows);
  return out.finish("eval.json", "coverage " + format_double(raw.coverage) + ", mean width " +
                                     format_double(raw.mean_width));
}

CommandOutput cmd_demo(Demo which, const RunConfig& config) {
  config.validate();
  switch (which) {
    case Demo::normal_normal: return demo_normal_normal(config);
    case Demo::efron: return demo_efron(config);
    case Demo::coverage: return demo_coverage(config);
  }
  throw InputError("unknown demo");
}

}  // namespace genpred::cli
