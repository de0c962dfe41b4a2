#pragma once

#include <string>
#include <vector>

#include "poststrat/simstudy.hpp"

namespace poststrat {

/// Parses a summary CSV back into records; throws CsvError / ConfigError on
/// malformed input.
std::vector<SummaryRecord> read_summary_csv(std::istream& in);

/// Emits one SVG and one plain-text table per (condition, metric) into
/// out_dir. Each SVG is a panel grid with rows = p values and columns =
/// estimators; within a panel every method gets a point at the mean and a
/// segment spanning the 2.5-97.5% quantiles, colored by representation.
/// Returns the paths written.
std::vector<std::string> write_report(const std::vector<SummaryRecord>& rows,
                                      const std::string& out_dir);

}  // namespace poststrat
