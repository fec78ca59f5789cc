#include "memctl/experiment.hpp"

#include "memctl/control.hpp"
#include "memctl/duality.hpp"

#include <omp.h>

#include <chrono>
#include <functional>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace memctl {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kIdentityTolerance = 1e-6;

struct Context {
    const ScenarioConfig& cfg;
    fs::path dir;
    std::ostream& log;
    ordered_json constants = ordered_json::object();
    std::vector<std::string> artifacts;
    std::vector<std::string> warnings;
    std::vector<std::string> violations;

    void csv(const std::string& name, const CsvTable& table) {
        write_csv(dir / name, table);
        artifacts.push_back(name);
    }
    void json(const std::string& name, const ordered_json& doc) {
        write_json(dir / name, doc);
        artifacts.push_back(name);
    }
    void warn(std::string w) {
        log << "warning: " << w << "\n";
        warnings.push_back(std::move(w));
    }
    void check(bool ok, const std::string& what) {
        if (!ok) violations.push_back(what);
    }
};

std::string tail_name(TailKind k) {
    switch (k) {
        case TailKind::zero: return "zero";
        case TailKind::constant: return "constant";
        case TailKind::exponential: return "exponential";
    }
    return "?";
}

std::string nonlinearity_name(NonlinearityKind k) {
    switch (k) {
        case NonlinearityKind::zero: return "zero";
        case NonlinearityKind::kappa_sin: return "kappa_sin";
        case NonlinearityKind::kappa_bounded_rational: return "kappa_bounded_rational";
    }
    return "?";
}

ordered_json resolved_config(const ScenarioConfig& c) {
    ordered_json j;
    j["preset"] = c.preset;
    j["mode"] = std::string(to_string(c.mode));
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["grid"] = {{"tau", c.tau}, {"n_steps", c.n_steps}};
    j["basis"] = {{"n_modes", c.n_modes}, {"collocation_points", c.collocation_points}};
    j["coefficients"] = {{"b0", c.b0}, {"b1", c.b1}, {"c0", c.c0}, {"kernel_decay", c.kernel_decay}};
    j["actuator"] = {{"a1", c.a1}, {"a2", c.a2}};
    j["history"] = {{"gamma", c.gamma}, {"span", c.history_span}, {"intervals", c.history_intervals},
                    {"tail", tail_name(c.tail)}, {"tail_rate", c.tail_rate}, {"amplitude", c.history_amplitude}};
    j["delay"] = {{"kind", c.delay_kind}, {"lag", c.delay_lag}, {"slope", c.delay_slope},
                  {"a", c.delay_a}, {"b", c.delay_b}};
    j["nonlinearity"] = {{"kind", nonlinearity_name(c.nonlinearity)}, {"kappa", c.kappa}};
    j["control"] = {{"lambdas", c.lambdas}, {"lambda", c.lambda}, {"target", c.target},
                    {"sweep_kind", c.sweep_kind}, {"tol_outer", c.tol_outer}, {"max_outer", c.max_outer},
                    {"tol_fix", c.tol_fix}, {"max_iter", c.max_iter},
                    {"perturbation_directions", c.perturbation_directions},
                    {"perturbation_eps", c.perturbation_eps}};
    j["checks"] = {{"betas", c.betas}, {"alpha", c.alpha}, {"cocycle_eps_steps", c.cocycle_eps_steps},
                   {"resolvent_csv", c.resolvent_csv}};
    j["duality"] = {{"ps", c.duality_ps}, {"dim", c.duality_dim}, {"pairs", c.duality_pairs},
                    {"lambdas", c.duality_lambdas}};
    return j;
}

/// Delay arguments rho_j = t_j - sigma(||x_j||) that land in the history.
std::vector<double> negative_delays(const DelayProblem& p, const Trajectory* x) {
    std::vector<double> out;
    for (int j = 0; j <= p.grid.n_steps; ++j) {
        const ModeVector& head = x ? x->states[static_cast<std::size_t>(j)] : p.phi.head();
        const double rho = delay_evaluate(p.grid.node(j), head, p.law);
        if (rho <= 0.0) out.push_back(rho);
    }
    return out;
}

void record_table_constants(Context& ctx, const DelayProblem& p, const ResolventTable& table, const Trajectory* x) {
    const ExponentialBound eb = fit_exponential_bound(table);
    ctx.constants["M"] = json_number(eb.M);
    ctx.constants["beta"] = json_number(eb.beta);
    ctx.check(eb.holds_on(table), "exponential bound |R(t,s)| <= M e^{beta (t-s)} fails on the grid");
    const auto rho = negative_delays(p, x);
    const HistoryConstants hc = history_bound_constants(p.phi, rho);
    ctx.constants["H2"] = json_number(hc.H2);
    ctx.constants["H3"] = json_number(hc.H3);
}

double probe_value(const ModeVector& x, double xi) {
    double v = 0.0;
    const double scale = std::sqrt(2.0 / std::numbers::pi);
    for (Eigen::Index n = 0; n < x.size(); ++n) v += x[n] * scale * std::sin(static_cast<double>(n + 1) * xi);
    return v;
}

CsvTable trajectory_table(const Trajectory& x) {
    const int modes = x.states.empty() ? 0 : static_cast<int>(x.states.front().size());
    const auto probes = probe_points();
    std::vector<std::string> cols{"t"};
    for (int n = 1; n <= modes; ++n) cols.push_back("mode_" + std::to_string(n));
    for (std::size_t k = 1; k <= probes.size(); ++k) cols.push_back("probe_" + std::to_string(k));
    CsvTable t(std::move(cols));
    for (int j = 0; j <= x.grid.n_steps; ++j) {
        const ModeVector& s = x.states[static_cast<std::size_t>(j)];
        std::vector<double> row{x.grid.node(j)};
        for (int n = 0; n < modes; ++n) row.push_back(s[n]);
        for (double xi : probes) row.push_back(probe_value(s, xi));
        t.add_row(row);
    }
    return t;
}

ordered_json gramian_json(const GramianMatrix& g) {
    return {{"trace", json_number(g.trace())}, {"min_eigenvalue", json_number(g.min_eigenvalue())},
            {"asymmetry", json_number(g.asymmetry())}};
}

void run_resolvent_check(Context& ctx) {
    const ScenarioConfig& cfg = ctx.cfg;
    const DelayProblem p = cfg.problem();
    const ResolventTable table = build_resolvent_table(p.grid, p.basis, p.coeffs);
    CsvTable checks({"check", "parameter", "value"});
    auto row = [&checks](const std::string& name, double param, double value) {
        checks.add_row({name, format_double(param), format_double(value)});
    };

    double diag = 0.0;
    for (int n = 1; n <= table.n_modes(); ++n)
        for (int i = 0; i <= p.grid.n_steps; ++i) diag = std::max(diag, std::abs(table(n, i, i) - 1.0));
    row("diagonal_defect", 0.0, diag);
    ctx.check(diag == 0.0, "R(s,s) differs from the identity");

    // The memory-free comparison always runs on a copy with the kernel switched off.
    ScenarioConfig free_cfg = cfg;
    free_cfg.c0 = 0.0;
    const CoefficientFunctions free_coeffs = free_cfg.coefficients();
    const ResolventTable free_table = build_resolvent_table(p.grid, p.basis, free_coeffs);
    const double mf = memory_free_defect(free_table, free_coeffs);
    row("memory_free_defect", 0.0, mf);
    ctx.constants["memory_free_defect"] = json_number(mf);
    ctx.check(mf <= 1e-6, "memory-free resolvent differs from the evolution system by " + format_double(mf));

    const double q = q_kernel_reconstruct(table, p.coeffs).defect;
    const double pk = p_kernel_inverse_check(table, p.coeffs).defect;
    row("q_kernel_defect", 0.0, q);
    row("p_kernel_defect", 0.0, pk);
    ctx.constants["q_kernel_defect"] = json_number(q);
    ctx.constants["p_kernel_defect"] = json_number(pk);

    std::vector<double> eps;
    for (int k : cfg.cocycle_eps_steps) eps.push_back(k * p.grid.step());

    ordered_json nb = ordered_json::object(), small = ordered_json::object(), cocycle = ordered_json::object();
    const double delta_bar = p.nonlinearity.kind == NonlinearityKind::zero ? 0.0 : p.nonlinearity.kappa;
    const HistoryConstants hc = history_bound_constants(p.phi, negative_delays(p, nullptr));
    for (double beta : cfg.betas) {
        const std::string key = format_double(beta);
        const double n_beta = fractional_bound_scan(table, p.coeffs, beta);
        row("fractional_bound", beta, n_beta);
        nb[key] = json_number(n_beta);
        ctx.check(std::isfinite(n_beta), "fractional bound is not finite for beta = " + key);

        const CocycleSweep cs = cocycle_sweep(table, p.coeffs, cfg.alpha, beta, 0.0, eps);
        for (std::size_t k = 0; k < cs.eps.size(); ++k) {
            row("cocycle_defect_beta_" + key, cs.eps[k], cs.defect[k]);
            row("cocycle_ratio_beta_" + key, cs.eps[k], cs.ratio[k]);
        }
        cocycle[key] = {{"eps", cs.eps}, {"ratio", cs.ratio}};

        const double c_ab = fractional_ratio_bound(cfg.alpha, beta, p.grid.tau, p.basis.n_modes, p.coeffs);
        const double s = smallness_condition(c_ab, n_beta, hc.H3, delta_bar, p.grid.tau, beta);
        row("smallness", beta, s);
        small[key] = json_number(s);
        if (!(s < 1.0)) ctx.warn("smallness condition not met for beta = " + key + " (value " + format_double(s) + ")");
    }
    ctx.constants["N_beta"] = nb;
    ctx.constants["cocycle"] = cocycle;
    ctx.constants["smallness"] = small;

    record_table_constants(ctx, p, table, nullptr);
    row("exponential_M", 0.0, ctx.constants["M"].is_null() ? kNaN : ctx.constants["M"].get<double>());
    row("exponential_beta", 0.0, ctx.constants["beta"].is_null() ? kNaN : ctx.constants["beta"].get<double>());
    row("H2", 0.0, hc.H2);
    row("H3", 0.0, hc.H3);

    ctx.csv("checks.csv", checks);
    if (cfg.resolvent_csv) {
        std::ostringstream os;
        write_resolvent_csv(table, os);
        write_text_file(ctx.dir / "resolvent.csv", os.str());
        ctx.artifacts.push_back("resolvent.csv");
    }
}

void run_steer(Context& ctx, bool nonlinear) {
    const ScenarioConfig& cfg = ctx.cfg;
    const DelayProblem p = cfg.problem();
    const ResolventTable table = build_resolvent_table(p.grid, p.basis, p.coeffs);
    const Eigen::MatrixXd bmat = p.actuator();
    const GramianMatrix gram = assemble_gramian(table, bmat);
    const ModeVector d = cfg.target_state();

    ordered_json summary;
    summary["mode"] = std::string(to_string(cfg.mode));
    summary["lambda"] = cfg.lambda;
    SteeringResult r;
    if (nonlinear) {
        OuterLoopOptions opt;
        opt.tol = cfg.tol_outer;
        opt.max_outer = cfg.max_outer;
        opt.picard = PicardOptions{cfg.tol_fix, cfg.max_iter};
        r = nonlinear_control_loop(cfg.lambda, p, d, table, gram, opt);
        if (r.relaxed) ctx.warn("outer loop needed the damped retry");
    } else {
        r = linear_optimal_control(cfg.lambda, table, bmat, gram, p.phi.head(), d);
    }
    summary["terminal_error"] = json_number(r.terminal_error);
    summary["identity_residual"] = json_number(r.identity_residual);
    summary["control_energy"] = json_number(r.control_energy);
    summary["cost"] = json_number(cost_functional(r.x, r.u, d, cfg.lambda));
    summary["outer_iterations"] = r.outer_iterations;
    summary["outer_changes"] = r.outer_changes;
    summary["relaxed"] = r.relaxed;
    summary["gramian"] = gramian_json(gram);
    ctx.check(r.identity_residual <= kIdentityTolerance,
              "terminal identity residual " + format_double(r.identity_residual) + " exceeds 1e-6");

    if (!nonlinear && cfg.perturbation_directions > 0) {
        const PerturbationReport pr = optimality_perturbation_test(
            r.x, r.u, d, cfg.lambda, table, bmat, cfg.perturbation_directions, cfg.perturbation_eps, cfg.seed);
        summary["stationarity"] = {{"directions", cfg.perturbation_directions},
                                   {"eps", cfg.perturbation_eps},
                                   {"max_central_difference", json_number(pr.max_central_difference)},
                                   {"tolerance", json_number(pr.tolerance)},
                                   {"min_increase", json_number(pr.min_increase)},
                                   {"passed", pr.passed}};
        ctx.check(pr.passed, "stationarity test failed (max central difference " +
                                 format_double(pr.max_central_difference) + ")");
    }
    record_table_constants(ctx, p, table, &r.x);
    ctx.csv("trajectory.csv", trajectory_table(r.x));
    ctx.json("summary.json", summary);
}

void run_sweep(Context& ctx) {
    const ScenarioConfig& cfg = ctx.cfg;
    const DelayProblem p = cfg.problem();
    const ResolventTable table = build_resolvent_table(p.grid, p.basis, p.coeffs);

    SteeringScenario sc;
    sc.kind = cfg.sweep_kind == "linear" ? SteeringKind::linear : SteeringKind::nonlinear;
    sc.problem = &p;
    sc.table = &table;
    sc.bmat = p.actuator();
    sc.gram = assemble_gramian(table, sc.bmat);
    sc.x0 = p.phi.head();
    sc.d = cfg.target_state();
    sc.outer.tol = cfg.tol_outer;
    sc.outer.max_outer = cfg.max_outer;
    sc.outer.picard = PicardOptions{cfg.tol_fix, cfg.max_iter};

    std::vector<SweepRow> rows;
    if (cfg.lambdas.empty()) ctx.warn("empty lambda list: sweep.csv has a header only");
    else rows = lambda_sweep(cfg.lambdas, sc);

    CsvTable t({"lambda", "terminal_error", "control_energy", "outer_iters", "identity_residual"});
    ordered_json failed = ordered_json::array();
    int ok_rows = 0;
    for (const SweepRow& r : rows) {
        t.add_row(std::vector<double>{r.lambda, r.terminal_error, r.control_energy,
                                      static_cast<double>(r.outer_iters), r.identity_residual});
        if (!r.ok) {
            ctx.warn("lambda = " + format_double(r.lambda) + " failed: " + r.message);
            failed.push_back({{"lambda", r.lambda}, {"message", r.message}});
        } else {
            ++ok_rows;
            ctx.check(r.identity_residual <= kIdentityTolerance,
                      "terminal identity residual " + format_double(r.identity_residual) +
                          " exceeds 1e-6 at lambda = " + format_double(r.lambda));
        }
    }
    const bool decreasing = strictly_decreasing_errors(rows);
    const double slope = ok_rows >= 2 ? fitted_decay_slope(rows) : kNaN;
    if (ok_rows >= 2) ctx.check(decreasing, "terminal error is not strictly decreasing along the sweep");

    ordered_json summary;
    summary["sweep_kind"] = cfg.sweep_kind;
    summary["rows"] = rows.size();
    summary["failed_rows"] = failed;
    summary["strictly_decreasing"] = decreasing;
    summary["fitted_decay_slope"] = json_number(slope);
    summary["gramian"] = gramian_json(sc.gram);
    ctx.constants["fitted_decay_slope"] = json_number(slope);
    record_table_constants(ctx, p, table, nullptr);
    ctx.csv("sweep.csv", t);
    ctx.json("summary.json", summary);
}

void run_duality(Context& ctx) {
    using namespace duality;
    const ScenarioConfig& cfg = ctx.cfg;
    const int dim = cfg.duality_dim;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto random_vector = [&] {
        Eigen::VectorXd v(dim);
        for (int k = 0; k < dim; ++k) v[k] = normal(rng);
        return v;
    };

    CsvTable t({"p", "lambda", "solution_norm", "x_norm", "residual", "iterations"});
    ordered_json per_p = ordered_json::array();
    for (double p : cfg.duality_ps) {
        PNormSpace{dim, p}.validate();
        const double q = p / (p - 1.0);
        double identity_err = 0.0, norm_err = 0.0, inverse_err = 0.0;
        double min_monotone = std::numeric_limits<double>::infinity();
        for (int k = 0; k < cfg.duality_pairs; ++k) {
            const Eigen::VectorXd x = random_vector();
            const Eigen::VectorXd y = random_vector();
            const Eigen::VectorXd jx = duality_map(x, p);
            const double nx = p_norm(x, p);
            identity_err = std::max(identity_err, std::abs(x.dot(jx) - nx * nx) / (nx * nx));
            norm_err = std::max(norm_err, std::abs(p_norm(jx, q) - nx) / nx);
            inverse_err = std::max(inverse_err, (duality_map(jx, q) - x).cwiseAbs().maxCoeff() / x.cwiseAbs().maxCoeff());
            const double m = (x - y).dot(jx - duality_map(y, p));
            min_monotone = std::min(min_monotone, m / (nx * nx + p_norm(y, p) * p_norm(y, p)));
        }
        ctx.check(identity_err <= 1e-12 && norm_err <= 1e-12, "duality identities fail for p = " + format_double(p));
        ctx.check(inverse_err <= 1e-10, "inverse duality fails for p = " + format_double(p));
        ctx.check(cfg.duality_pairs == 0 || min_monotone >= -1e-14, "monotonicity fails for p = " + format_double(p));

        const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(dim, dim, [&] { return normal(rng); });
        const Eigen::MatrixXd mat = a * a.transpose() / dim + 0.1 * Eigen::MatrixXd::Identity(dim, dim);
        const Eigen::VectorXd x = random_vector();
        double direct_err = 0.0;
        for (double lambda : cfg.duality_lambdas) {
            const MonotoneSolveResult s = monotone_solve(lambda, mat, x, p);
            t.add_row(std::vector<double>{p, lambda, p_norm(s.z, p), p_norm(x, p), s.residual,
                                          static_cast<double>(s.iterations)});
            if (p == 2.0) {
                const Eigen::VectorXd direct =
                    (lambda * Eigen::MatrixXd::Identity(dim, dim) + mat).llt().solve(lambda * x);
                direct_err = std::max(direct_err, (s.z - direct).cwiseAbs().maxCoeff());
            }
        }
        const DecayReport dr = contraction_and_decay_check(mat, x, p, cfg.duality_lambdas);
        ctx.check(dr.contraction_holds, "norm bound ||z||_p <= ||x||_p fails for p = " + format_double(p));
        ctx.check(dr.decreasing, "solution norm does not decrease along the lambda list for p = " + format_double(p));
        if (p == 2.0) ctx.check(direct_err <= 1e-8, "p = 2 solve differs from the direct solve by " + format_double(direct_err));
        per_p.push_back({{"p", p},
                         {"identity_rel_error", identity_err},
                         {"norm_rel_error", norm_err},
                         {"inverse_error", inverse_err},
                         {"min_monotonicity", json_number(min_monotone)},
                         {"direct_solve_error", p == 2.0 ? json_number(direct_err) : ordered_json(nullptr)},
                         {"contraction_holds", dr.contraction_holds},
                         {"decreasing", dr.decreasing}});
    }
    ctx.csv("duality.csv", t);
    ctx.json("summary.json", {{"dim", dim}, {"pairs", cfg.duality_pairs}, {"results", per_p}});
}

}  // namespace

std::vector<double> probe_points(int count) {
    std::vector<double> xi;
    for (int k = 1; k <= count; ++k) xi.push_back(k * std::numbers::pi / (count + 1));
    return xi;
}

RunOutcome run_scenario(const ScenarioConfig& config, std::ostream& log) {
    const auto start = std::chrono::steady_clock::now();
    RunOutcome out;
    out.output_dir = config.output_dir;
    try {
        prepare_output_dir(out.output_dir);
    } catch (const OutputError& e) {
        out.exit_code = exit_config;
        out.message = e.what();
        return out;
    }

    Context ctx{config, out.output_dir, log, ordered_json::object(), {}, {}, {}};
    try {
        switch (config.mode) {
            case RunMode::resolvent_check: run_resolvent_check(ctx); break;
            case RunMode::steer_linear: run_steer(ctx, false); break;
            case RunMode::steer_nonlinear: run_steer(ctx, true); break;
            case RunMode::lambda_sweep: run_sweep(ctx); break;
            case RunMode::duality_lab: run_duality(ctx); break;
        }
        if (!ctx.violations.empty()) {
            std::string msg;
            for (const auto& v : ctx.violations) msg += (msg.empty() ? "" : "; ") + v;
            throw InvariantViolation(msg);
        }
    } catch (const InvariantViolation& e) {
        out.exit_code = exit_invariant;
        out.message = std::string("invariant violation: ") + e.what();
    } catch (const NumericalError& e) {
        out.exit_code = exit_numerical;
        out.message = std::string("numerical error: ") + e.what();
    } catch (const InputError& e) {
        out.exit_code = exit_config;
        out.message = std::string("input error: ") + e.what();
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ordered_json manifest;
    manifest["mode"] = std::string(to_string(config.mode));
    manifest["seed"] = config.seed;
    manifest["exit_code"] = out.exit_code;
    manifest["message"] = out.message;
    manifest["config"] = resolved_config(config);
    manifest["grid"] = {{"tau", config.tau},
                        {"n_steps", config.n_steps},
                        {"n_modes", config.n_modes},
                        {"collocation_points", config.collocation_points}};
    manifest["constants"] = ctx.constants;
    manifest["artifacts"] = ctx.artifacts;
    manifest["warnings"] = ctx.warnings;
    manifest["threads"] = omp_get_max_threads();
    manifest["wall_time_s"] = wall;
    try {
        write_json(out.output_dir / "manifest.json", manifest);
        ctx.artifacts.push_back("manifest.json");
    } catch (const OutputError& e) {
        if (out.exit_code == exit_ok) {
            out.exit_code = exit_config;
            out.message = e.what();
        }
    }
    out.artifacts = ctx.artifacts;
    out.warnings = ctx.warnings;
    return out;
}

namespace {

RunOutcome run_loaded(const std::function<ScenarioConfig()>& load, const RunOptions& options, std::ostream& log) {
    ScenarioConfig cfg;
    try {
        cfg = load();
        if (options.mode) cfg.mode = parse_run_mode(*options.mode);
    } catch (const InputError& e) {
        RunOutcome out;
        out.exit_code = exit_config;
        out.message = std::string("config error: ") + e.what();
        return out;
    }
    if (options.out_dir) cfg.output_dir = options.out_dir->string();
    if (options.seed) cfg.seed = *options.seed;
    return run_scenario(cfg, log);
}

}  // namespace

RunOutcome run_config_file(const fs::path& path, const RunOptions& options, std::ostream& log) {
    return run_loaded([&] { return ScenarioConfig::from_file(path); }, options, log);
}

RunOutcome run_preset(const std::string& name, const RunOptions& options, std::ostream& log) {
    return run_loaded([&] { return ScenarioConfig::from_text("preset = " + name + "\n", "preset:" + name); }, options,
                      log);
}

}  // namespace memctl
