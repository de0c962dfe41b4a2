#include "poststrat/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "poststrat/config.hpp"
#include "poststrat/csv.hpp"
#include "poststrat/report.hpp"
#include "poststrat/stats.hpp"
#include "poststrat/weighting.hpp"

namespace poststrat {

namespace fs = std::filesystem;

namespace {

bool write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << content;
  return static_cast<bool>(out);
}

nlohmann::json file_entry(const std::string& content) {
  nlohmann::json j;
  j["bytes"] = content.size();
  j["fnv1a64"] = fnv1a64_hex(std::span<const char>(content.data(), content.size()));
  return j;
}

}  // namespace

SimulateOutcome run_simulate(const std::string& config_path) {
  SimulateOutcome outcome;

  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "error: cannot open config file '" << config_path << "'\n";
    outcome.exit_code = 1;
    return outcome;
  }

  RunConfig config;
  try {
    nlohmann::json j = nlohmann::json::parse(in);
    config = parse_config(j);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: config is not valid JSON: " << e.what() << '\n';
    outcome.exit_code = 2;
    return outcome;
  } catch (const ConfigError& e) {
    std::cerr << "error: invalid config: " << e.what() << '\n';
    outcome.exit_code = 2;
    return outcome;
  }

  if (const char* env_seed = std::getenv("PH_SEED")) {
    try {
      config.grid.base_seed = std::stoull(env_seed);
    } catch (const std::exception&) {
      std::cerr << "error: PH_SEED is not an unsigned integer\n";
      outcome.exit_code = 2;
      return outcome;
    }
  }

  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory '" << config.output_dir
              << "': " << ec.message() << '\n';
    outcome.exit_code = 1;
    return outcome;
  }

  SimResult result = run_grid(config.grid, config.settings);
  SummaryResult summary = summarize(result);

  std::ostringstream results_os, summary_os;
  write_results_csv(results_os, result);
  write_summary_csv(summary_os, summary);
  const std::string results_bytes = results_os.str();
  const std::string summary_bytes = summary_os.str();

  nlohmann::json manifest;
  manifest["schema"] = "poststrat-harmonize v1";
  manifest["seed"] = config.grid.base_seed;
  manifest["config"] = config_to_json(config);
  manifest["outputs"]["results.csv"] = file_entry(results_bytes);
  manifest["outputs"]["summary.csv"] = file_entry(summary_bytes);
  manifest["gaps"] = summary.gaps;

  const fs::path dir(config.output_dir);
  if (!write_file(dir / "results.csv", results_bytes) ||
      !write_file(dir / "summary.csv", summary_bytes) ||
      !write_file(dir / "manifest.json", manifest.dump(2) + "\n")) {
    std::cerr << "error: cannot write into output directory '"
              << config.output_dir << "'\n";
    outcome.exit_code = 1;
    return outcome;
  }

  for (const auto& gap : summary.gaps) {
    std::cerr << "warning: empty summary cell: " << gap << '\n';
  }
  outcome.result = std::move(result);
  outcome.summary = std::move(summary);
  outcome.exit_code = outcome.summary->gaps.empty() ? 0 : 3;
  return outcome;
}

int run_rake(const std::string& sample_csv, const std::string& margins_csv,
             double tol, const std::string& weights_out) {
  std::ifstream sample_in(sample_csv);
  if (!sample_in) {
    std::cerr << "error: cannot open sample file '" << sample_csv << "'\n";
    return 1;
  }
  std::ifstream margins_in(margins_csv);
  if (!margins_in) {
    std::cerr << "error: cannot open margins file '" << margins_csv << "'\n";
    return 1;
  }

  CsvTable sample, margins;
  try {
    sample = read_csv(sample_in);
    margins = read_csv(margins_in);
  } catch (const CsvError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  const int var_col = margins.column("variable");
  const int level_col = margins.column("level");
  const int target_col = margins.column("target");
  if (var_col < 0 || level_col < 0 || target_col < 0) {
    std::cerr << "error: margins file needs columns variable,level,target\n";
    return 2;
  }

  // Group margin rows into coded variables, preserving appearance order.
  std::vector<CodedMarginVariable> variables;
  for (std::size_t r = 0; r < margins.rows.size(); ++r) {
    const auto& row = margins.rows[r];
    const int line = margins.line_numbers[r];
    const std::string& var_name = row[static_cast<std::size_t>(var_col)];
    const std::string& level_name = row[static_cast<std::size_t>(level_col)];
    double target;
    try {
      target = parse_csv_double(row[static_cast<std::size_t>(target_col)], line);
    } catch (const CsvError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
    CodedMarginVariable* var = nullptr;
    for (auto& v : variables) {
      if (v.name == var_name) var = &v;
    }
    if (var == nullptr) {
      variables.push_back(CodedMarginVariable{var_name, {}, {}, {}});
      var = &variables.back();
    }
    for (const auto& existing : var->level_names) {
      if (existing == level_name) {
        std::cerr << "error: line " << line << ": duplicate margin level "
                  << var_name << "=" << level_name << '\n';
        return 2;
      }
    }
    var->level_names.push_back(level_name);
    var->targets.push_back(target);
  }
  if (variables.empty()) {
    std::cerr << "error: margins file has no rows\n";
    return 2;
  }

  for (auto& var : variables) {
    const int col = sample.column(var.name);
    if (col < 0) {
      std::cerr << "error: margin variable '" << var.name
                << "' is not a sample column\n";
      return 2;
    }
    for (std::size_t r = 0; r < sample.rows.size(); ++r) {
      const std::string& value = sample.rows[r][static_cast<std::size_t>(col)];
      int level = -1;
      for (std::size_t lv = 0; lv < var.level_names.size(); ++lv) {
        if (var.level_names[lv] == value) level = static_cast<int>(lv);
      }
      if (level < 0) {
        std::cerr << "error: line " << sample.line_numbers[r] << ": value '"
                  << value << "' of " << var.name
                  << " has no margin target\n";
        return 2;
      }
      var.unit_level.push_back(level);
    }
  }

  WeightVector w;
  try {
    w = rake_coded(variables, sample.rows.size(), tol, 1000);
  } catch (const RakingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  std::vector<std::string> unit_ids;
  const int id_col = sample.column("unit_id");
  for (std::size_t r = 0; r < sample.rows.size(); ++r) {
    unit_ids.push_back(id_col >= 0 ? sample.rows[r][static_cast<std::size_t>(id_col)]
                                   : std::to_string(r));
  }
  std::ofstream out(weights_out, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write '" << weights_out << "'\n";
    return 1;
  }
  write_weights_csv(out, w, unit_ids);

  std::cout << "rake: converged in " << w.convergence.iterations
            << " cycle(s), max relative margin discrepancy "
            << format_double(w.convergence.max_rel_discrepancy) << '\n';
  return 0;
}

int run_report(const std::string& summary_csv, const std::string& out_dir) {
  std::ifstream in(summary_csv);
  if (!in) {
    std::cerr << "error: cannot open summary file '" << summary_csv << "'\n";
    return 1;
  }
  std::vector<SummaryRecord> rows;
  try {
    rows = read_summary_csv(in);
  } catch (const CsvError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  if (rows.empty()) {
    std::cerr << "error: summary is empty\n";
    return 2;
  }
  auto written = write_report(rows, out_dir);
  for (const auto& path : written) std::cout << "wrote " << path << '\n';
  return 0;
}

}  // namespace poststrat
