#include <exception>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "genpred/cli/commands.hpp"
#include "genpred/errors.hpp"
#include "genpred/format.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, target, method, monotone, taus;
  std::optional<std::string> data, calibration_data, input, model, calibration;
  std::optional<double> alpha;
};

genpred::cli::RunConfig resolve(const Overrides& o) {
  using namespace genpred;
  cli::RunConfig c = o.config.empty() ? cli::RunConfig{} : cli::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.target) c.target = *o.target;
  if (o.method) c.method = cli::parse_method(*o.method);
  if (o.monotone) c.monotone = qnn::parse_monotone_mode(*o.monotone);
  if (o.taus) {
    c.taus.clear();
    std::stringstream ss(*o.taus);
    std::string item;
    while (std::getline(ss, item, ',')) c.taus.push_back(parse_double(item));
  }
  if (o.data) c.data_path = *o.data;
  if (o.calibration_data) c.calibration_data_path = *o.calibration_data;
  if (o.input) c.input_path = *o.input;
  if (o.model) c.model_path = *o.model;
  if (o.calibration) c.calibration_path = *o.calibration;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantile networks, conformal calibration and the Bayesian predictive demos"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(genpred::cli::kVersion));
  Overrides o;
  app.add_option("--config", o.config, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--alpha", o.alpha, "Miscoverage level in (0, 1)");
  app.add_option("--taus", o.taus, "Comma-separated quantile levels");
  app.add_option("--target", o.target, "Name of the response column");
  app.add_option("--method", o.method, "qnn or kernel");
  app.add_option("--monotone", o.monotone, "increments or penalty");
  app.add_option("--data", o.data, "Training (and calibration) CSV");
  app.add_option("--calibration-data", o.calibration_data, "Separate calibration CSV");
  app.add_option("--input", o.input, "Rows to predict or evaluate");
  app.add_option("--model", o.model, "Model file (default <out>/model.gpq)");
  app.add_option("--calibration", o.calibration, "Calibration record for conformalized output");

  auto* train = app.add_subcommand("train", "Fit a quantile network");
  auto* calibrate = app.add_subcommand("calibrate", "Compute the conformal correction");
  auto* predict = app.add_subcommand("predict", "Quantiles and intervals for new rows");
  auto* eval = app.add_subcommand("eval", "Coverage and loss on labelled rows");
  auto* demo = app.add_subcommand("demo", "Run an experiment");
  std::string which;
  demo->add_option("which", which, "normal-normal, efron or coverage")
      ->required()
      ->check(CLI::IsMember({"normal-normal", "efron", "coverage"}));
  for (auto* sub : {train, calibrate, predict, eval, demo}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    using namespace genpred::cli;
    const RunConfig config = resolve(o);
    CommandOutput result;
    if (*train) result = cmd_train(config);
    else if (*calibrate) result = cmd_calibrate(config);
    else if (*predict) result = cmd_predict(config);
    else if (*eval) result = cmd_eval(config);
    else result = cmd_demo(parse_demo(which), config);
    std::cout << result.summary << '\n';
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "genpred: error: " << e.what() << '\n';
    return 1;
  }
}
