#pragma once

// The command-line steps as library calls: each command loads every input
// it needs before computing anything, then writes its outputs atomically.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "silvaflux/error.hpp"
#include "silvaflux/flow_model.hpp"

namespace silvaflux {

struct PipelineConfig {
  std::filesystem::path source;
  std::map<std::string, std::filesystem::path, std::less<>> inputs;  // absolute or relative to the config
  std::filesystem::path out_dir;
  std::string period;
  std::string title;

  double default_sigma_rel = 0.10;
  BalanceTolerance tolerance;
  double scale = 1e-4;  // px per m3 WFE
  std::string highlight_color = "#d64541";
  int start_year = 2022;
  int years = 100;

  bool has_input(std::string_view name) const;
  /// Throws InvalidInput naming the config file when the input is absent.
  const std::filesystem::path& input(std::string_view name) const;
};

/// Reads `[inputs]`, `[output]` and `[options]` from a TOML config. Relative
/// paths resolve against the config's directory.
PipelineConfig load_config(const std::filesystem::path& path);

struct CommandResult {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> summary;  // one line per headline number
};

CommandResult cmd_convert(const PipelineConfig& config);
CommandResult cmd_reconcile(const PipelineConfig& config);
CommandResult cmd_scenario(const PipelineConfig& config);
CommandResult cmd_report(const PipelineConfig& config);
CommandResult cmd_carbon(const PipelineConfig& config);

/// 2 for input errors, 3 for infeasible reconciliation, 4 for scenario errors.
int exit_code(ErrorCode code);

/// One-line JSON object {"error", "message", "path", "row"}.
std::string error_json(const Error& error);

}  // namespace silvaflux
