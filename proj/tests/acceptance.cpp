// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "memctl/config.hpp"
#include "memctl/control.hpp"
#include "memctl/duality.hpp"
#include "memctl/experiment.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace memctl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [x]");
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<void(Verdict&)>& body) {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(v);
    } catch (const std::exception& e) {
        v.require(false, std::string("threw: ") + e.what());
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.require(dt <= budget_s, "time " + num(dt) + "s <= " + num(budget_s) + "s");
    if (!v.pass) ++failures;
    std::printf("[%s] %d. %s: %s\n", v.pass ? "PASS" : "FAIL", id, title.c_str(), v.detail.c_str());
    std::fflush(stdout);
}

ResolventTable table_for(int modes, int steps, const CoefficientFunctions& c) {
    return build_resolvent_table(TimeGrid::make(1.0, steps), BasisSpec::with_modes(modes), c);
}

ScenarioConfig preset(const std::string& name, const std::string& extra = "") {
    return ScenarioConfig::from_text("preset = " + name + "\n" + extra, "preset:" + name);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main() {
    criterion(1, "resolvent identity suite (N=8, n_steps=100)", 10.0, [](Verdict& v) {
        const auto coeffs = CoefficientFunctions::heat_default();
        const auto t100 = table_for(8, 100, coeffs);
        double diag = 0.0;
        for (int n = 1; n <= 8; ++n)
            for (int i = 0; i <= 100; ++i) diag = std::max(diag, std::abs(t100(n, i, i) - 1.0));
        v.require(diag == 0.0, "R(s,s)=1 defect " + num(diag));

        const auto free_coeffs = CoefficientFunctions::smooth(-2.0, -0.1, 0.0, 1.0);
        const auto free_table = table_for(8, 100, free_coeffs);
        double mf = 0.0;
        for (int n = 1; n <= 8; ++n)
            for (int i = 0; i <= 100; ++i)
                for (int j = i; j <= 100; ++j)
                    mf = std::max(mf, std::abs(free_table(n, j, i) -
                                               oracle::memory_free_factor(n, 0.01 * i, 0.01 * j, -2.0, -0.1)));
        v.require(mf <= 1e-5, "memory-free vs closed form " + num(mf) + " <= 1e-5");

        const auto t200 = table_for(8, 200, coeffs);
        const double q1 = q_kernel_reconstruct(t100, coeffs).defect, q2 = q_kernel_reconstruct(t200, coeffs).defect;
        const double p1 = p_kernel_inverse_check(t100, coeffs).defect, p2 = p_kernel_inverse_check(t200, coeffs).defect;
        v.require(q1 <= 1e-3 && p1 <= 1e-3, "Q/P defects " + num(q1) + ", " + num(p1) + " <= 1e-3");
        v.require(q1 / q2 >= 3.5 && p1 / p2 >= 3.5, "halving ratios " + num(q1 / q2) + ", " + num(p1 / p2) + " >= 3.5");
    });

    criterion(2, "constant-kernel oracle (b=-2, c0=0.5, t-s=1)", 1.0, [](Verdict& v) {
        const double rk4 = oracle::constant_kernel_rk4(1, -2.0, 0.5, 1.0, 2000);
        const double closed = oracle::constant_kernel_closed_form(1, -2.0, 0.5, 1.0);
        const auto r = solve_mode_resolvent(1, 0, TimeGrid::make(1.0, 100), CoefficientFunctions::constant(-2.0, 0.5));
        v.require(std::abs(rk4 - closed) <= 1e-10, "RK4 " + num(rk4) + " vs closed form " + num(closed));
        v.require(std::abs(r.back() - rk4) <= 1e-3, "r(1) = " + num(r.back()) + ", |diff| " + num(std::abs(r.back() - rk4)));
    });

    criterion(3, "fractional bounds and cocycle ratios", 10.0, [](Verdict& v) {
        const auto coeffs = CoefficientFunctions::heat_default();
        const auto a = table_for(8, 100, coeffs), b = table_for(8, 200, coeffs);
        for (double beta : {0.25, 0.5, 0.75}) {
            const double na = fractional_bound_scan(a, coeffs, beta), nb = fractional_bound_scan(b, coeffs, beta);
            v.require(std::isfinite(na) && std::abs(na - nb) <= 0.1 * nb,
                      "N_" + num(beta) + " = " + num(na) + " / " + num(nb));
        }
        const double h = a.grid().step();
        const std::vector<double> eps{4 * h, 8 * h, 16 * h};
        const auto cs = cocycle_sweep(a, coeffs, 0.5, 0.5, 0.0, eps);
        bool finite = true;
        for (double r : cs.ratio) finite = finite && std::isfinite(r);
        v.require(finite && cs.max_ratio <= 4.0 * cs.min_ratio,
                  "defect/eps^(1-beta) in [" + num(cs.min_ratio) + ", " + num(cs.max_ratio) + "]");
    });

    criterion(4, "Gramian suite", 5.0, [](Verdict& v) {
        const auto t = table_for(16, 200, CoefficientFunctions::heat_default());
        const auto g = assemble_gramian(t, control_matrix(oracle::pi / 4, 3 * oracle::pi / 4, 16));
        v.require(g.asymmetry() <= 1e-12 * g.trace(), "asymmetry " + num(g.asymmetry()));
        v.require(g.min_eigenvalue() > 0.0, "min eigenvalue " + num(g.min_eigenvalue()));
        const auto s = table_for(1, 2000, CoefficientFunctions::constant(-2.0, 0.0));
        const double g1 = assemble_gramian(s, control_matrix(0.0, oracle::pi, 1)).entries(0, 0);
        const double exact = (1.0 - std::exp(-6.0)) / 6.0;
        v.require(std::abs(g1 - exact) <= 1e-6, "single mode " + num(g1) + " vs " + num(exact));
    });

    criterion(5, "linear steering (steer-linear preset)", 30.0, [](Verdict& v) {
        const auto cfg = preset("steer-linear");
        const auto p = cfg.problem();
        const auto table = build_resolvent_table(p.grid, p.basis, p.coeffs);
        SteeringScenario sc;
        sc.table = &table;
        sc.bmat = p.actuator();
        sc.gram = assemble_gramian(table, sc.bmat);
        sc.x0 = p.phi.head();
        sc.d = cfg.target_state();
        v.require(sc.gram.min_eigenvalue() > 0.0, "Gramian PD");
        const std::vector<double> lambdas{1e-1, 1e-2, 1e-3};
        const auto rows = lambda_sweep(lambdas, sc);
        double worst = 0.0;
        for (const auto& r : rows) worst = std::max(worst, r.ok ? r.identity_residual : INFINITY);
        v.require(worst <= 1e-6, "identity residual " + num(worst));
        v.require(strictly_decreasing_errors(rows), "errors decreasing");
        const double slope = fitted_decay_slope(rows);
        v.require(slope >= 0.8 && slope <= 1.1, "slope " + num(slope));
        const auto r = linear_optimal_control(1e-3, table, sc.bmat, sc.gram, sc.x0, sc.d);
        const auto pr = optimality_perturbation_test(r.x, r.u, sc.d, 1e-3, table, sc.bmat, 16, 1e-4, cfg.seed);
        v.require(pr.max_central_difference <= 1e-4 * (1.0 + pr.cost),
                  "stationarity " + num(pr.max_central_difference));
    });

    criterion(6, "nonlinear steering (heat-default preset)", 120.0, [](Verdict& v) {
        const auto cfg = preset("heat-default");
        const auto p = cfg.problem();
        const auto table = build_resolvent_table(p.grid, p.basis, p.coeffs);
        const auto g = assemble_gramian(table, p.actuator());
        const auto r = nonlinear_control_loop(1e-3, p, cfg.target_state(), table, g);
        v.require(r.outer_iterations <= 50, "outer iterations " + std::to_string(r.outer_iterations));
        v.require(r.identity_residual <= 1e-6, "identity residual " + num(r.identity_residual));
        SteeringScenario sc;
        sc.kind = SteeringKind::nonlinear;
        sc.problem = &p;
        sc.table = &table;
        sc.bmat = p.actuator();
        sc.gram = g;
        sc.x0 = p.phi.head();
        sc.d = cfg.target_state();
        const std::vector<double> lambdas{1e-1, 1e-2, 1e-3};
        const auto rows = lambda_sweep(lambdas, sc);
        bool all_ok = true;
        for (const auto& row : rows) all_ok = all_ok && row.ok;
        v.require(all_ok && strictly_decreasing_errors(rows), "sweep errors " + num(rows[0].terminal_error) + " > " +
                                                                  num(rows[1].terminal_error) + " > " +
                                                                  num(rows[2].terminal_error));
    });

    criterion(7, "delay correctness (Picard vs method of steps)", 60.0, [](Verdict& v) {
        double dist[2];
        int k = 0;
        for (int steps : {200, 400}) {
            const auto cfg = preset("heat-default", "[nonlinearity]\nkappa = 0.2\n[grid]\nn_steps = " + std::to_string(steps) + "\n");
            const auto p = cfg.problem();
            const auto table = build_resolvent_table(p.grid, p.basis, p.coeffs);
            const auto u = ControlSignal::zero(p.grid, p.basis.n_modes);
            dist[k++] = sup_distance(picard_solve(p, u, table).trajectory, method_of_steps_oracle(p, u, 4 * steps));
        }
        v.require(dist[0] <= 5e-3, "n_steps=200 distance " + num(dist[0]));
        v.require(dist[1] <= 1.5e-3, "n_steps=400 distance " + num(dist[1]));

        const auto cfg = preset("heat-default", "[nonlinearity]\nkappa = 0.2\n[delay]\nlag = 2\n[history]\nspan = 2.5\nintervals = 500\n");
        const auto p = cfg.problem();
        const auto table = build_resolvent_table(p.grid, p.basis, p.coeffs);
        const auto res = picard_solve(p, ControlSignal::zero(p.grid, p.basis.n_modes), table);
        const CollocationTransform tr(p.basis);
        double defect = 0.0;
        for (int j = 0; j <= p.grid.n_steps; ++j) {
            const double t = p.grid.node(j);
            defect = std::max(defect, (evaluate_nonlinearity(t, p.phi.at(t - 2.0), p, tr) -
                                       res.forcing[static_cast<std::size_t>(j)]).cwiseAbs().maxCoeff());
        }
        v.require(defect == 0.0, "lag > tau history defect " + num(defect));
    });

    criterion(8, "duality lab", 5.0, [](Verdict& v) {
        using namespace memctl::duality;
        std::mt19937_64 rng(2024);
        std::normal_distribution<double> nd;
        auto rv = [&](int dim) {
            Eigen::VectorXd x(dim);
            for (int i = 0; i < dim; ++i) x[i] = nd(rng);
            return x;
        };
        double id_err = 0.0, min_mono = INFINITY, norm_ratio = 0.0, direct = 0.0;
        for (double p : {1.5, 2.0, 3.0, 4.0}) {
            const double q = p / (p - 1);
            for (int k = 0; k < 1000; ++k) {
                const auto x = rv(3), y = rv(3);
                const auto jx = duality_map(x, p);
                const double n = p_norm(x, p);
                id_err = std::max({id_err, std::abs(x.dot(jx) - n * n) / (n * n), std::abs(p_norm(jx, q) - n) / n});
                min_mono = std::min(min_mono, (x - y).dot(jx - duality_map(y, p)));
            }
            const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(3, 3, [&] { return nd(rng); });
            const Eigen::MatrixXd m = a * a.transpose() / 3 + 0.1 * Eigen::MatrixXd::Identity(3, 3);
            for (double lambda : {1.0, 0.1, 0.01, 0.001}) {
                const auto x = rv(3);
                const auto s = monotone_solve(lambda, m, x, p);
                norm_ratio = std::max(norm_ratio, p_norm(s.z, p) / p_norm(x, p));
                if (p == 2.0) {
                    const Eigen::VectorXd d = (lambda * Eigen::MatrixXd::Identity(3, 3) + m).llt().solve(lambda * x);
                    direct = std::max(direct, (s.z - d).cwiseAbs().maxCoeff());
                }
            }
        }
        v.require(id_err <= 1e-12, "J identities " + num(id_err));
        v.require(direct <= 1e-8, "p=2 vs direct " + num(direct));
        v.require(min_mono >= 0.0, "min <x-y, Jx-Jy> " + num(min_mono));
        v.require(norm_ratio <= 1.0, "max ||z||/||x|| " + num(norm_ratio));
    });

    criterion(9, "determinism of preset artifacts", 60.0, [](Verdict& v) {
        const fs::path root = fs::temp_directory_path() / "memctl_acceptance";
        fs::remove_all(root);
        int compared = 0;
        bool same = true;
        for (const auto& name : preset_names()) {
            std::ostringstream log;
            const auto a = run_preset(name, RunOptions{root / (name + "_a"), 1u, std::nullopt}, log);
            const auto b = run_preset(name, RunOptions{root / (name + "_b"), 1u, std::nullopt}, log);
            if (a.exit_code != 0 || b.exit_code != 0) {
                v.require(false, name + " exit " + std::to_string(a.exit_code) + ": " + a.message);
                continue;
            }
            for (const auto& f : a.artifacts) {
                if (fs::path(f).extension() != ".csv") continue;
                ++compared;
                same = same && slurp(root / (name + "_a") / f) == slurp(root / (name + "_b") / f);
            }
        }
        v.require(same && compared > 0, std::to_string(compared) + " CSV files byte-identical");
    });

    std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
    return failures ? 1 : 0;
}
