#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "censorsim/engine.hpp"
#include "censorsim/metrics.hpp"

#include "json.hpp"

namespace censorsim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A run config materializes a grid of (dgp, policy) cells sharing defaults.
struct ExperimentMatrix {
  std::vector<SimulationConfig> cells;
  std::filesystem::path output_dir = "out";
  bool overwrite = false;
  UncertaintySettings uncertainty;
};

nlohmann::json sim_config_to_json(const SimulationConfig& cfg);
SimulationConfig sim_config_from_json(const nlohmann::json& j,
                                      const SimulationConfig& defaults = {});

// Parses a config file (JSON with // comments). `include` merges another
// file first; local keys override included ones. Validation collects every
// problem before throwing.
ExperimentMatrix load_matrix(const std::filesystem::path& path);
ExperimentMatrix matrix_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = ".");

// All validation problems across all cells, tagged with cell names.
std::vector<std::string> validate_matrix(const ExperimentMatrix& matrix);

}  // namespace censorsim
