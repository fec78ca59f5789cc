#include "memctl/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

namespace memctl {

namespace {

constexpr double kPi = std::numbers::pi;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "preset", "mode", "seed", "output_dir",
        "grid.tau", "grid.n_steps",
        "basis.n_modes", "basis.collocation_points",
        "coefficients.b0", "coefficients.b1", "coefficients.c0", "coefficients.kernel_decay",
        "actuator.a1", "actuator.a2",
        "history.gamma", "history.span", "history.intervals", "history.tail", "history.tail_rate",
        "history.amplitude",
        "delay.kind", "delay.lag", "delay.slope", "delay.a", "delay.b",
        "nonlinearity.kind", "nonlinearity.kappa",
        "control.lambdas", "control.lambda", "control.target", "control.sweep_kind", "control.tol_outer",
        "control.max_outer", "control.tol_fix", "control.max_iter", "control.perturbation_directions",
        "control.perturbation_eps",
        "checks.betas", "checks.alpha", "checks.cocycle_eps_steps", "checks.resolvent_csv",
        "duality.ps", "duality.dim", "duality.pairs", "duality.lambdas",
    };
    return keys;
}

void parse_into(std::string_view text, const std::string& source, bool from_preset, ConfigEntries& out,
                int depth);

void parse_into(std::string_view text, const std::string& source, bool from_preset, ConfigEntries& out,
                int depth) {
    if (depth > 2) throw ConfigError(source + ": presets may not nest");
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header '" + line + "'");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError(where + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": missing key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (!known_keys().contains(full)) throw ConfigError(where + ": unknown key '" + full + "'");
        if (full == "preset") {
            parse_into(preset_text(value), "preset:" + value, true, out, depth + 1);
            out.values["preset"] = value;
            out.lines["preset"] = from_preset ? 0 : line_no;
            continue;
        }
        out.values[full] = value;
        out.lines[full] = from_preset ? 0 : line_no;
    }
}

class Reader {
public:
    explicit Reader(const ConfigEntries& e) : e_(e) {}

    std::string where(const std::string& key) const {
        const auto it = e_.lines.find(key);
        const int line = it == e_.lines.end() ? 0 : it->second;
        return e_.source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": key '" + key + "'";
    }

    template <class T>
    void get(const std::string& key, T& out, std::map<std::string, std::string>& echo) const {
        const auto it = e_.values.find(key);
        if (it == e_.values.end()) return;
        out = convert<T>(key, it->second);
        echo[key] = it->second;
    }

private:
    template <class T>
    T convert(const std::string& key, const std::string& v) const {
        if constexpr (std::is_same_v<T, std::string>) {
            return v;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (v == "true" || v == "1" || v == "yes") return true;
            if (v == "false" || v == "0" || v == "no") return false;
            throw ConfigError(where(key) + ": expected a boolean, got '" + v + "'");
        } else if constexpr (std::is_same_v<T, double>) {
            return to_double(key, v);
        } else if constexpr (std::is_same_v<T, int>) {
            const double d = to_double(key, v);
            if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError(where(key) + ": expected an integer, got '" + v + "'");
            return static_cast<int>(d);
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            char* end = nullptr;
            errno = 0;
            const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
            if (v.empty() || *end != '\0' || errno != 0 || v.front() == '-')
                throw ConfigError(where(key) + ": expected a nonnegative integer, got '" + v + "'");
            return static_cast<std::uint64_t>(x);
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            std::vector<double> out;
            for (const auto& item : split(v)) out.push_back(to_double(key, item));
            return out;
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
            std::vector<int> out;
            for (const auto& item : split(v)) out.push_back(convert<int>(key, item));
            return out;
        }
    }

    static std::vector<std::string> split(const std::string& v) {
        std::vector<std::string> out;
        std::string item;
        std::istringstream in(v);
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    double to_double(const std::string& key, const std::string& v) const {
        std::string s = trim(v);
        double sign = 1.0;
        if (!s.empty() && s.front() == '-') {
            sign = -1.0;
            s = s.substr(1);
        }
        // "pi" and "<number>*pi" / "pi/<number>" are accepted for actuator windows.
        const auto p = s.find("pi");
        if (p != std::string::npos) {
            std::string before = trim(s.substr(0, p));
            std::string after = trim(s.substr(p + 2));
            double factor = 1.0;
            if (!before.empty()) {
                if (before.back() != '*') throw ConfigError(where(key) + ": cannot parse '" + v + "'");
                factor = to_double(key, before.substr(0, before.size() - 1));
            }
            if (!after.empty()) {
                if (after.front() != '/') throw ConfigError(where(key) + ": cannot parse '" + v + "'");
                factor /= to_double(key, after.substr(1));
            }
            return sign * factor * kPi;
        }
        char* end = nullptr;
        errno = 0;
        const double d = std::strtod(s.c_str(), &end);
        if (s.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(d))
            throw ConfigError(where(key) + ": expected a number, got '" + v + "'");
        return sign * d;
    }

    const ConfigEntries& e_;
};

}  // namespace

std::string_view to_string(RunMode mode) {
    switch (mode) {
        case RunMode::resolvent_check: return "resolvent-check";
        case RunMode::steer_linear: return "steer-linear";
        case RunMode::steer_nonlinear: return "steer-nonlinear";
        case RunMode::lambda_sweep: return "lambda-sweep";
        case RunMode::duality_lab: return "duality-lab";
    }
    return "unknown";
}

RunMode parse_run_mode(std::string_view text) {
    for (RunMode m : {RunMode::resolvent_check, RunMode::steer_linear, RunMode::steer_nonlinear,
                      RunMode::lambda_sweep, RunMode::duality_lab})
        if (to_string(m) == text) return m;
    throw ConfigError("unknown mode '" + std::string(text) + "'");
}

ConfigEntries parse_config_text(std::string_view text, std::string source) {
    ConfigEntries entries;
    entries.source = source;
    parse_into(text, source, false, entries, 0);
    return entries;
}

ScenarioConfig ScenarioConfig::from_entries(const ConfigEntries& entries) {
    ScenarioConfig c;
    const Reader r(entries);
    auto& echo = c.echo;
    std::string mode, tail, nonlinearity;
    r.get("preset", c.preset, echo);
    r.get("mode", mode, echo);
    r.get("seed", c.seed, echo);
    r.get("output_dir", c.output_dir, echo);
    r.get("grid.tau", c.tau, echo);
    r.get("grid.n_steps", c.n_steps, echo);
    r.get("basis.n_modes", c.n_modes, echo);
    r.get("basis.collocation_points", c.collocation_points, echo);
    r.get("coefficients.b0", c.b0, echo);
    r.get("coefficients.b1", c.b1, echo);
    r.get("coefficients.c0", c.c0, echo);
    r.get("coefficients.kernel_decay", c.kernel_decay, echo);
    r.get("actuator.a1", c.a1, echo);
    r.get("actuator.a2", c.a2, echo);
    r.get("history.gamma", c.gamma, echo);
    const bool span_given = entries.values.contains("history.span");
    r.get("history.span", c.history_span, echo);
    r.get("history.intervals", c.history_intervals, echo);
    r.get("history.tail", tail, echo);
    r.get("history.tail_rate", c.tail_rate, echo);
    r.get("history.amplitude", c.history_amplitude, echo);
    r.get("delay.kind", c.delay_kind, echo);
    r.get("delay.lag", c.delay_lag, echo);
    r.get("delay.slope", c.delay_slope, echo);
    r.get("delay.a", c.delay_a, echo);
    r.get("delay.b", c.delay_b, echo);
    r.get("nonlinearity.kind", nonlinearity, echo);
    r.get("nonlinearity.kappa", c.kappa, echo);
    r.get("control.lambdas", c.lambdas, echo);
    r.get("control.lambda", c.lambda, echo);
    r.get("control.target", c.target, echo);
    r.get("control.sweep_kind", c.sweep_kind, echo);
    r.get("control.tol_outer", c.tol_outer, echo);
    r.get("control.max_outer", c.max_outer, echo);
    r.get("control.tol_fix", c.tol_fix, echo);
    r.get("control.max_iter", c.max_iter, echo);
    r.get("control.perturbation_directions", c.perturbation_directions, echo);
    r.get("control.perturbation_eps", c.perturbation_eps, echo);
    r.get("checks.betas", c.betas, echo);
    r.get("checks.alpha", c.alpha, echo);
    r.get("checks.cocycle_eps_steps", c.cocycle_eps_steps, echo);
    r.get("checks.resolvent_csv", c.resolvent_csv, echo);
    r.get("duality.ps", c.duality_ps, echo);
    r.get("duality.dim", c.duality_dim, echo);
    r.get("duality.pairs", c.duality_pairs, echo);
    r.get("duality.lambdas", c.duality_lambdas, echo);

    auto fail = [&](const std::string& key, const std::string& what) {
        throw ConfigError(r.where(key) + ": " + what);
    };

    if (!mode.empty()) {
        try {
            c.mode = parse_run_mode(mode);
        } catch (const ConfigError&) {
            fail("mode", "unknown mode '" + mode + "'");
        }
    }
    if (!tail.empty()) {
        if (tail == "zero") c.tail = TailKind::zero;
        else if (tail == "constant") c.tail = TailKind::constant;
        else if (tail == "exponential") c.tail = TailKind::exponential;
        else fail("history.tail", "expected zero, constant or exponential");
    }
    if (!nonlinearity.empty()) {
        if (nonlinearity == "zero") c.nonlinearity = NonlinearityKind::zero;
        else if (nonlinearity == "kappa_sin") c.nonlinearity = NonlinearityKind::kappa_sin;
        else if (nonlinearity == "kappa_bounded_rational") c.nonlinearity = NonlinearityKind::kappa_bounded_rational;
        else fail("nonlinearity.kind", "expected zero, kappa_sin or kappa_bounded_rational");
    }
    if (!span_given && c.gamma > 0.0) c.history_span = 3.0 / c.gamma;

    if (!(c.tau > 0.0)) fail("grid.tau", "must be > 0");
    if (c.n_steps < 1) fail("grid.n_steps", "must be >= 1");
    if (c.n_modes < 1) fail("basis.n_modes", "must be >= 1");
    if (c.collocation_points < 2 * c.n_modes) fail("basis.collocation_points", "must be >= 2 * n_modes");
    if (!(c.b0 + std::abs(c.b1) < -1.0)) fail("coefficients.b0", "b(t) = b0 + b1 sin t must stay below -1");
    if (!(c.kernel_decay >= 0.0)) fail("coefficients.kernel_decay", "must be >= 0");
    if (!(c.a1 >= 0.0)) fail("actuator.a1", "must be >= 0");
    if (!(c.a2 <= kPi * (1.0 + 1e-15))) fail("actuator.a2", "must be <= pi");
    if (!(c.a1 < c.a2)) fail("actuator.a1", "must be < actuator.a2 (got a1 = " + std::to_string(c.a1) +
                                                ", a2 = " + std::to_string(c.a2) + ")");
    if (!(c.gamma > 0.0)) fail("history.gamma", "must be > 0");
    if (!(c.history_span > 0.0)) fail("history.span", "must be > 0");
    if (c.history_intervals < 1) fail("history.intervals", "must be >= 1");
    if (!(c.tail_rate >= 0.0)) fail("history.tail_rate", "must be >= 0");
    if (c.delay_kind != "constant" && c.delay_kind != "linear" && c.delay_kind != "quadratic")
        fail("delay.kind", "expected constant, linear or quadratic");
    if (!(c.delay_lag >= 0.0)) fail("delay.lag", "must be >= 0");
    if (!(c.delay_slope >= 0.0)) fail("delay.slope", "must be >= 0");
    if (!(c.delay_a >= 0.0)) fail("delay.a", "must be >= 0");
    if (!(c.delay_b >= 0.0)) fail("delay.b", "must be >= 0");
    for (std::size_t k = 0; k < c.lambdas.size(); ++k) {
        if (!(c.lambdas[k] >= 1e-12)) fail("control.lambdas", "values must be >= 1e-12");
        if (k > 0 && !(c.lambdas[k] < c.lambdas[k - 1])) fail("control.lambdas", "must be strictly decreasing");
    }
    if (!(c.lambda >= 1e-12)) fail("control.lambda", "must be >= 1e-12");
    if (c.sweep_kind != "linear" && c.sweep_kind != "nonlinear") fail("control.sweep_kind", "expected linear or nonlinear");
    if (!(c.tol_outer > 0.0)) fail("control.tol_outer", "must be > 0");
    if (c.max_outer < 1) fail("control.max_outer", "must be >= 1");
    if (!(c.tol_fix > 0.0)) fail("control.tol_fix", "must be > 0");
    if (c.max_iter < 1) fail("control.max_iter", "must be >= 1");
    if (c.perturbation_directions < 0) fail("control.perturbation_directions", "must be >= 0");
    if (!(c.perturbation_eps > 0.0)) fail("control.perturbation_eps", "must be > 0");
    for (double b : c.betas)
        if (!(b > 0.0 && b < 1.0)) fail("checks.betas", "values must lie in (0, 1)");
    if (!(c.alpha > 0.0 && c.alpha <= 1.0)) fail("checks.alpha", "must lie in (0, 1]");
    for (int e : c.cocycle_eps_steps)
        if (e < 1 || e > c.n_steps) fail("checks.cocycle_eps_steps", "values must lie in [1, n_steps]");
    for (double p : c.duality_ps)
        if (!(p > 1.0)) fail("duality.ps", "values must be > 1");
    if (c.duality_dim < 1) fail("duality.dim", "must be >= 1");
    if (c.duality_pairs < 0) fail("duality.pairs", "must be >= 0");
    for (std::size_t k = 0; k < c.duality_lambdas.size(); ++k) {
        if (!(c.duality_lambdas[k] > 0.0)) fail("duality.lambdas", "values must be > 0");
        if (k > 0 && !(c.duality_lambdas[k] < c.duality_lambdas[k - 1])) fail("duality.lambdas", "must be strictly decreasing");
    }
    try {
        (void)c.target_state();
    } catch (const InputError& e) {
        fail("control.target", e.what());
    }
    return c;
}

ScenarioConfig ScenarioConfig::from_text(std::string_view text, std::string source) {
    return from_entries(parse_config_text(text, std::move(source)));
}

ScenarioConfig ScenarioConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str(), path.string());
}

BasisSpec ScenarioConfig::basis() const { return BasisSpec{n_modes, collocation_points}; }

TimeGrid ScenarioConfig::grid() const { return TimeGrid::make(tau, n_steps); }

CoefficientFunctions ScenarioConfig::coefficients() const {
    return CoefficientFunctions::smooth(b0, b1, c0, kernel_decay);
}

DelayLaw ScenarioConfig::delay_law() const {
    if (delay_kind == "linear") return DelayLaw::linear(delay_slope);
    if (delay_kind == "quadratic") return DelayLaw::quadratic(delay_a, delay_b);
    return DelayLaw::constant(delay_lag);
}

HistorySegment ScenarioConfig::history() const {
    const int modes = n_modes;
    const double amp = history_amplitude;
    return HistorySegment::from_function(
        [modes, amp](double theta) {
            ModeVector v = ModeVector::Zero(modes);
            v[0] = amp * std::exp(theta);
            return v;
        },
        history_span, history_intervals, gamma, tail, tail_rate);
}

DelayProblem ScenarioConfig::problem() const {
    DelayProblem p{basis(), grid(), coefficients(), history(), delay_law(), Nonlinearity{nonlinearity, kappa}, a1, a2};
    p.validate();
    return p;
}

ModeVector ScenarioConfig::target_state() const {
    const BasisSpec b = basis();
    if (target == "zero") return ModeVector::Zero(n_modes);
    if (target == "first-mode") {
        ModeVector d = ModeVector::Zero(n_modes);
        d[0] = 0.5;
        return d;
    }
    if (target == "bump")
        return project([](double xi) { return 0.5 * std::exp(-std::pow((xi - kPi / 2) / 0.5, 2)); }, b);
    if (target.rfind("modes:", 0) == 0) {
        ModeVector d = ModeVector::Zero(n_modes);
        std::istringstream in(target.substr(6));
        std::string item;
        int k = 0;
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            if (k >= n_modes) throw InputError("target lists more coefficients than basis.n_modes");
            char* end = nullptr;
            const double v = std::strtod(item.c_str(), &end);
            if (*end != '\0' || !std::isfinite(v)) throw InputError("target coefficient '" + item + "' is not a number");
            d[k++] = v;
        }
        return d;
    }
    throw InputError("unknown target '" + target + "' (use zero, first-mode, bump or 'modes: c1, c2, ...')");
}

std::vector<std::string> preset_names() {
    return {"heat-default", "memory-free", "resolvent-check", "steer-linear", "steer-nonlinear", "duality-lab"};
}

std::string preset_text(std::string_view name) {
    // Body of the default scenario; variants prepend their mode and append overrides.
    static const std::string body = R"(seed = 1
[grid]
tau = 1
n_steps = 200
[basis]
n_modes = 32
collocation_points = 128
[coefficients]
b0 = -2
b1 = -0.1
c0 = 0.5
kernel_decay = 1
[actuator]
a1 = pi/4
a2 = 3*pi/4
[history]
gamma = 2
span = 1.5
intervals = 300
tail = constant
amplitude = 1
[delay]
kind = constant
lag = 0.5
[nonlinearity]
kind = kappa_sin
kappa = 0.1
[control]
lambdas = 0.1, 0.01, 0.001
lambda = 0.001
target = bump
sweep_kind = nonlinear
)";
    auto variant = [](std::string_view mode, std::string_view extra) {
        return "mode = " + std::string(mode) + "\n" + body + std::string(extra);
    };
    const std::string small_grid = "[grid]\nn_steps = 100\n[basis]\nn_modes = 8\ncollocation_points = 32\n";
    if (name == "heat-default") return variant("lambda-sweep", "");
    if (name == "memory-free") return variant("resolvent-check", "[coefficients]\nc0 = 0\n" + small_grid);
    if (name == "resolvent-check") return variant("resolvent-check", small_grid);
    // Full-window actuator: the Gramian is diagonal and well conditioned against the lambda list.
    if (name == "steer-linear")
        return variant("steer-linear",
                       "[nonlinearity]\nkind = zero\n[actuator]\na1 = 0\na2 = pi\n"
                       "[control]\ntarget = modes: 0.5, 0.2\nsweep_kind = linear\n");
    if (name == "steer-nonlinear") return variant("steer-nonlinear", "");
    if (name == "duality-lab") return variant("duality-lab", "");
    throw ConfigError("unknown preset '" + std::string(name) + "'");
}

}  // namespace memctl
