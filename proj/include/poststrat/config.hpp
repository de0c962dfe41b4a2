#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"
#include "poststrat/simstudy.hpp"

namespace poststrat {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Full simulate-command configuration. Every field defaults to the standard
/// scenario values; unknown JSON keys are rejected.
struct RunConfig {
  SimGrid grid;
  StudySettings settings;
  std::string output_dir = "out";
};

RunConfig default_config();

/// Parses and validates; throws ConfigError on unknown keys or bad values.
RunConfig parse_config(const nlohmann::json& j);

/// Echo of the effective configuration (used for the run manifest).
nlohmann::json config_to_json(const RunConfig& config);

}  // namespace poststrat
