#pragma once

// Scenario runner behind the command-line tool: executes one mode, writes its
// CSV/JSON artifacts plus manifest.json, and maps failures onto exit codes.

#include "memctl/config.hpp"
#include "memctl/report.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace memctl {

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_config = 2,
    exit_numerical = 3,
    exit_invariant = 4,
};

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;  ///< subcommand alias overriding the config's mode
};

struct RunOutcome {
    int exit_code = exit_ok;
    std::string message;
    std::filesystem::path output_dir;
    std::vector<std::string> artifacts;
    std::vector<std::string> warnings;
};

/// Executes the scenario and writes artifacts; never throws for scenario failures.
RunOutcome run_scenario(const ScenarioConfig& config, std::ostream& log);

/// Loads the config file, applies overrides and runs it.
RunOutcome run_config_file(const std::filesystem::path& path, const RunOptions& options, std::ostream& log);

/// Same as run_config_file for a named preset.
RunOutcome run_preset(const std::string& name, const RunOptions& options, std::ostream& log);

/// Grid-node probe positions xi_k = k pi / (count + 1), k = 1..count.
std::vector<double> probe_points(int count = 8);

}  // namespace memctl
