#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "genpred/cli/config.hpp"

namespace genpred::cli {

enum class Demo { normal_normal, efron, coverage };
std::string to_string(Demo d);
Demo parse_demo(const std::string& s);

/// Files written by a command (all under the output directory) and a short
/// human-readable summary.
struct CommandOutput {
  std::vector<std::filesystem::path> files;
  std::string summary;
};

// Fits the quantile network on the training part of [data] path and writes the
// model, per-level final losses and the loss trace.
CommandOutput cmd_train(const RunConfig& config);
// Scores the calibration part and writes the conformal record.
CommandOutput cmd_calibrate(const RunConfig& config);
// One row per input row: requested quantiles, the raw interval and, with a
// calibration record, the conformalized interval.
CommandOutput cmd_predict(const RunConfig& config);
// Coverage, width and pinball loss on a labelled input file.
CommandOutput cmd_eval(const RunConfig& config);
CommandOutput cmd_demo(Demo which, const RunConfig& config);

}  // namespace genpred::cli
