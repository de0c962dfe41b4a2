#pragma once

#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

namespace poststrat {

class CsvError : public std::runtime_error {
 public:
  CsvError(int line, const std::string& message);
  int line = 0;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line per row

  int column(const std::string& name) const;  // -1 when absent
};

/// Reads a comma-delimited file with a mandatory header row. Lines starting
/// with '#' are skipped. Rows whose field count differs from the header raise
/// CsvError with the offending line number.
CsvTable read_csv(std::istream& in);

double parse_csv_double(const std::string& field, int line);

}  // namespace poststrat
