#include <string>

#include "CLI11.hpp"
#include "poststrat/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Simulation engine and weighting toolkit for harmonizing a "
               "three-category gender measurement with binary-sex population "
               "controls"};
  app.require_subcommand(1);

  std::string config_path;
  auto* simulate = app.add_subcommand(
      "simulate", "Run the simulation grid described by a JSON config");
  simulate->add_option("--config", config_path, "Path to the JSON config")
      ->required();

  std::string sample_csv, margins_csv, weights_out = "weights.csv";
  double tol = 1e-8;
  auto* rake = app.add_subcommand(
      "rake", "Rake a sample CSV to margin targets and write unit weights");
  rake->add_option("--sample", sample_csv, "Sample CSV with a header row")
      ->required();
  rake->add_option("--margins", margins_csv,
                   "Margins CSV with columns variable,level,target")
      ->required();
  rake->add_option("--tol", tol, "Convergence tolerance");
  rake->add_option("--out", weights_out, "Output weights CSV path");

  std::string summary_csv, report_dir;
  auto* report = app.add_subcommand(
      "report", "Render SVG figures and text tables from a summary CSV");
  report->add_option("--summary", summary_csv, "summary.csv from simulate")
      ->required();
  report->add_option("--out", report_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (simulate->parsed()) {
    return poststrat::run_simulate(config_path).exit_code;
  }
  if (rake->parsed()) {
    return poststrat::run_rake(sample_csv, margins_csv, tol, weights_out);
  }
  return poststrat::run_report(summary_csv, report_dir);
}
