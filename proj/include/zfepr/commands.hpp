#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "zfepr/config.hpp"

namespace zfepr {

/// Process-level overrides from the command line.
struct CliOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

/// Applies command-line overrides and recomputes the config hash.
void apply_overrides(RunConfig& run, const json& document, const CliOptions& options);

/// Each command returns the text of its primary output file.
std::string cmd_levels(const RunConfig& run);
std::string cmd_transitions(const RunConfig& run);
std::string cmd_sweep(const RunConfig& run);
std::string cmd_lineshape(const RunConfig& run);
std::string cmd_budget(const RunConfig& run);
std::string cmd_ingest(const std::filesystem::path& path);

struct FitReport {
  std::string json_text;  // machine-readable report
  std::string table;      // human-readable summary
};
FitReport cmd_fit(const RunConfig& run);

enum ExitCode : int { exit_ok = 0, exit_unexpected = 1, exit_config = 2, exit_data = 3, exit_numerical = 4 };

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace zfepr
