#pragma once

// Scenario configuration: flat "key = value" text with [section] headers.
//
//   # comment
//   preset = heat-default
//   mode = lambda-sweep
//   [grid]
//   n_steps = 200
//
// Keys are addressed as "section.key" ("mode", "seed", ... at top level).
// Unknown keys and malformed lines are errors that carry the line number.

#include "memctl/errors.hpp"
#include "memctl/mild_solver.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace memctl {

class ConfigError : public InputError {
public:
    using InputError::InputError;
};

enum class RunMode { resolvent_check, steer_linear, steer_nonlinear, lambda_sweep, duality_lab };

std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);

/// Raw key/value map with the line each key was set on (0 for preset defaults).
struct ConfigEntries {
    std::map<std::string, std::string> values;
    std::map<std::string, int> lines;
    std::string source;
};

/// Parses text into entries; `preset = name` pulls the named preset in first.
ConfigEntries parse_config_text(std::string_view text, std::string source);

struct ScenarioConfig {
    RunMode mode = RunMode::lambda_sweep;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::string preset;

    double tau = 1.0;
    int n_steps = 200;
    int n_modes = 32;
    int collocation_points = 128;

    double b0 = -2.0;
    double b1 = -0.1;
    double c0 = 0.5;
    double kernel_decay = 1.0;

    double a1 = 0.7853981633974483;
    double a2 = 2.356194490192345;

    double gamma = 2.0;
    double history_span = 1.5;
    int history_intervals = 300;
    TailKind tail = TailKind::constant;
    double tail_rate = 0.0;
    double history_amplitude = 1.0;

    std::string delay_kind = "constant";
    double delay_lag = 0.5;
    double delay_slope = 0.0;
    double delay_a = 0.0;
    double delay_b = 0.0;

    NonlinearityKind nonlinearity = NonlinearityKind::kappa_sin;
    double kappa = 0.1;

    std::vector<double> lambdas{0.1, 0.01, 0.001};
    double lambda = 1e-3;
    std::string target = "bump";
    std::string sweep_kind = "nonlinear";
    double tol_outer = 1e-8;
    int max_outer = 50;
    double tol_fix = 1e-10;
    int max_iter = 200;
    int perturbation_directions = 16;
    double perturbation_eps = 1e-4;

    std::vector<double> betas{0.25, 0.5, 0.75};
    double alpha = 0.5;
    std::vector<int> cocycle_eps_steps{4, 8, 16};
    bool resolvent_csv = false;

    std::vector<double> duality_ps{1.5, 2.0, 3.0, 4.0};
    int duality_dim = 3;
    int duality_pairs = 1000;
    std::vector<double> duality_lambdas{1.0, 0.1, 0.01, 0.001};

    /// Every resolved key with its final value, sorted by key.
    std::map<std::string, std::string> echo;

    static ScenarioConfig from_entries(const ConfigEntries& entries);
    static ScenarioConfig from_text(std::string_view text, std::string source = "<text>");
    static ScenarioConfig from_file(const std::filesystem::path& path);

    BasisSpec basis() const;
    TimeGrid grid() const;
    CoefficientFunctions coefficients() const;
    DelayLaw delay_law() const;
    HistorySegment history() const;
    DelayProblem problem() const;
    /// Target state d from `target`: a named profile or "modes: c1, c2, ...".
    ModeVector target_state() const;
};

std::vector<std::string> preset_names();
/// Config text of a named preset; throws ConfigError for unknown names.
std::string preset_text(std::string_view name);

}  // namespace memctl
