#pragma once

#include <optional>
#include <string>

#include "poststrat/simstudy.hpp"

namespace poststrat {

// Exit codes shared by the subcommands:
//   0 success, 1 I/O failure, 2 validation error, 3 partial grid,
//   4 raking non-convergence.

struct SimulateOutcome {
  int exit_code = 0;
  std::optional<SimResult> result;
  std::optional<SummaryResult> summary;
};

/// Runs the grid described by the config file and writes results.csv,
/// summary.csv and manifest.json into the configured output directory. The
/// PH_SEED environment variable, when set, overrides the config seed.
SimulateOutcome run_simulate(const std::string& config_path);

int run_rake(const std::string& sample_csv, const std::string& margins_csv,
             double tol, const std::string& weights_out);

int run_report(const std::string& summary_csv, const std::string& out_dir);

}  // namespace poststrat
