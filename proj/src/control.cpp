#include "memctl/control.hpp"

#include "memctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace memctl {

double GramianMatrix::min_eigenvalue() const {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(entries, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

double GramianMatrix::asymmetry() const { return (entries - entries.transpose()).cwiseAbs().maxCoeff(); }

namespace {

// Trapezoid weights times the resolvent slices D(tau, t_i): column i holds w_i^{1/2}-free factors.
Eigen::MatrixXd terminal_slices(const ResolventTable& table) {
    const int steps = table.grid().n_steps;
    Eigen::MatrixXd d(table.n_modes(), steps + 1);
    for (int i = 0; i <= steps; ++i) d.col(i) = table.slice(steps, i);
    return d;
}

Eigen::VectorXd trapezoid_weights(const TimeGrid& grid) {
    Eigen::VectorXd w = Eigen::VectorXd::Constant(grid.n_steps + 1, grid.step());
    w[0] *= 0.5;
    w[grid.n_steps] *= 0.5;
    return w;
}

void check_gramian_inputs(const ResolventTable& table, const Eigen::MatrixXd& bmat) {
    if (bmat.rows() != table.n_modes() || bmat.cols() != table.n_modes())
        throw InputError("assemble_gramian: control matrix must be N x N");
}

}  // namespace

GramianMatrix assemble_gramian(const ResolventTable& table, const Eigen::MatrixXd& bmat) {
    check_gramian_inputs(table, bmat);
    const Eigen::MatrixXd d = terminal_slices(table);
    const Eigen::VectorXd w = trapezoid_weights(table.grid());
    const Eigen::MatrixXd bbt = bmat * bmat.transpose();
    const int n = table.n_modes();
    GramianMatrix g{Eigen::MatrixXd::Zero(n, n), table.grid().tau};
#pragma omp parallel for schedule(dynamic, 1)
    for (int m = 0; m < n; ++m)
        for (int k = m; k < n; ++k) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < w.size(); ++i) acc += w[i] * d(m, i) * d(k, i);
            g.entries(m, k) = acc * bbt(m, k);
        }
    g.entries.triangularView<Eigen::StrictlyLower>() = g.entries.transpose().triangularView<Eigen::StrictlyLower>();
    return g;
}

namespace serial {
GramianMatrix assemble_gramian(const ResolventTable& table, const Eigen::MatrixXd& bmat) {
    check_gramian_inputs(table, bmat);
    const Eigen::MatrixXd d = terminal_slices(table);
    const Eigen::VectorXd w = trapezoid_weights(table.grid());
    const int n = table.n_modes();
    GramianMatrix g{Eigen::MatrixXd::Zero(n, n), table.grid().tau};
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const Eigen::MatrixXd db = d.col(i).asDiagonal() * bmat;
        g.entries += w[i] * db * db.transpose();
    }
    g.entries = 0.5 * (g.entries + g.entries.transpose()).eval();
    return g;
}
}  // namespace serial

ModeVector regularized_solve(double lambda, const GramianMatrix& gram, const ModeVector& rhs) {
    if (!(lambda > 0.0)) throw InputError("regularized_solve: lambda must be > 0");
    if (lambda < 1e-12) throw InputError("regularized_solve: lambda below 1e-12 is not meaningful in double precision");
    if (rhs.size() != gram.entries.rows()) throw InputError("regularized_solve: dimension mismatch");
    const Eigen::Index n = rhs.size();
    const Eigen::MatrixXd a = gram.entries + lambda * Eigen::MatrixXd::Identity(n, n);
    const ModeVector b = lambda * rhs;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    ModeVector z;
    if (llt.info() == Eigen::Success) {
        z = llt.solve(b);
    } else {
        z = a.ldlt().solve(b);
    }
    // One step of iterative refinement keeps the residual at rounding level for small lambda.
    const ModeVector r = b - a * z;
    z += (llt.info() == Eigen::Success) ? ModeVector(llt.solve(r)) : ModeVector(a.ldlt().solve(r));
    const double residual = (a * z - b).norm();
    if (!(residual <= 1e-8 * b.norm() + 1e-300))
        throw NumericalError("regularized_solve: residual " + std::to_string(residual) + " exceeds tolerance");
    return z;
}

ModeVector gramian_resolvent(double lambda, const GramianMatrix& gram, const ModeVector& w) {
    return regularized_solve(lambda, gram, w) / lambda;
}

ControlSignal control_from_vector(const ResolventTable& table, const Eigen::MatrixXd& bmat, const ModeVector& z) {
    const int steps = table.grid().n_steps;
    ControlSignal u{table.grid(), std::vector<ModeVector>(steps + 1)};
    for (int i = 0; i <= steps; ++i) u.samples[i] = bmat * table.slice(steps, i).cwiseProduct(z);
    return u;
}

ModeVector linear_terminal_state(const ResolventTable& table, const Eigen::MatrixXd& bmat, const ModeVector& x0,
                                 const ControlSignal& u) {
    const int steps = table.grid().n_steps;
    std::vector<ModeVector> f(steps + 1);
    for (int i = 0; i <= steps; ++i) f[i] = bmat * u.samples[i];
    return table.slice(steps, 0).cwiseProduct(x0) + terminal_convolution(table, f);
}

SteeringResult linear_optimal_control(double lambda, const ResolventTable& table, const Eigen::MatrixXd& bmat,
                                      const GramianMatrix& gram, const ModeVector& x0, const ModeVector& d) {
    const int steps = table.grid().n_steps;
    const ModeVector w = d - table.slice(steps, 0).cwiseProduct(x0);
    SteeringResult out;
    out.z = gramian_resolvent(lambda, gram, w);
    out.u = control_from_vector(table, bmat, out.z);
    std::vector<ModeVector> f(steps + 1);
    for (int i = 0; i <= steps; ++i) f[i] = bmat * out.u.samples[i];
    out.x = affine_mild_solve(table, x0, f);
    const ModeVector miss = out.x.states.back() - d;
    out.terminal_error = miss.norm();
    out.identity_residual = (miss + lambda * out.z).norm();
    out.control_energy = out.u.energy();
    out.outer_iterations = 1;
    return out;
}

namespace {

SteeringResult run_outer_loop(double lambda, const DelayProblem& problem, const ModeVector& d,
                              const ResolventTable& table, const GramianMatrix& gram,
                              const OuterLoopOptions& options, double relaxation) {
    const int steps = table.grid().n_steps;
    const Eigen::MatrixXd bmat = problem.actuator();
    const ModeVector free_part = table.slice(steps, 0).cwiseProduct(problem.phi.head());

    SteeringResult out;
    out.relaxed = relaxation != 1.0;
    auto state = picard_solve(problem, ControlSignal::zero(table.grid(), table.n_modes()), table, options.picard);
    ModeVector z = ModeVector::Zero(table.n_modes());
    bool first = true;
    for (int k = 1; k <= options.max_outer; ++k) {
        const ModeVector p = d - free_part - terminal_convolution(table, state.forcing);
        const ModeVector z_new = gramian_resolvent(lambda, gram, p);
        z = first ? z_new : ModeVector(relaxation * z_new + (1.0 - relaxation) * z);
        first = false;
        out.u = control_from_vector(table, bmat, z);
        auto next = picard_solve(problem, out.u, table, options.picard);
        const double change = sup_distance(next.trajectory, state.trajectory);
        state = std::move(next);
        out.outer_changes.push_back(change);
        out.outer_iterations = k;
        if (!std::isfinite(change)) break;
        if (change <= options.tol) {
            out.z = z;
            out.x = std::move(state.trajectory);
            const ModeVector miss = out.x.states.back() - d;
            out.terminal_error = miss.norm();
            out.identity_residual = (miss + lambda * z).norm();
            out.control_energy = out.u.energy();
            return out;
        }
    }
    throw PicardDivergence("nonlinear_control_loop: outer iteration did not converge in " +
                               std::to_string(out.outer_iterations) + " steps (relaxation " +
                               std::to_string(relaxation) + ")",
                           out.outer_changes);
}

}  // namespace

SteeringResult nonlinear_control_loop(double lambda, const DelayProblem& problem, const ModeVector& d,
                                      const ResolventTable& table, const GramianMatrix& gram,
                                      const OuterLoopOptions& options) {
    if (!(lambda > 0.0)) throw InputError("nonlinear_control_loop: lambda must be > 0");
    try {
        return run_outer_loop(lambda, problem, d, table, gram, options, options.relaxation);
    } catch (const PicardDivergence& first) {
        try {
            return run_outer_loop(lambda, problem, d, table, gram, options, options.retry_relaxation);
        } catch (const PicardDivergence& second) {
            throw PicardDivergence(std::string(second.what()) +
                                       "; try a larger lambda or a smaller nonlinearity (damped retry also failed)",
                                   second.changes());
        }
    }
}

double cost_functional(const Trajectory& x, const ControlSignal& u, const ModeVector& d, double lambda) {
    if (x.states.size() != u.samples.size()) throw InputError("cost_functional: grids do not match");
    return (x.states.back() - d).squaredNorm() + lambda * u.energy();
}

std::vector<SweepRow> lambda_sweep(std::span<const double> lambdas, const SteeringScenario& scenario) {
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        if (!(lambdas[k] > 0.0)) throw InputError("lambda_sweep: lambdas must be positive");
        if (k > 0 && !(lambdas[k] < lambdas[k - 1])) throw InputError("lambda_sweep: lambdas must be decreasing");
    }
    if (!scenario.table) throw InputError("lambda_sweep: scenario has no resolvent table");
    if (scenario.kind == SteeringKind::nonlinear && !scenario.problem)
        throw InputError("lambda_sweep: nonlinear scenario needs a problem");

    std::vector<SweepRow> rows(lambdas.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        SweepRow& row = rows[k];
        row.lambda = lambdas[k];
        try {
            const SteeringResult r =
                scenario.kind == SteeringKind::linear
                    ? linear_optimal_control(row.lambda, *scenario.table, scenario.bmat, scenario.gram, scenario.x0,
                                             scenario.d)
                    : nonlinear_control_loop(row.lambda, *scenario.problem, scenario.d, *scenario.table,
                                             scenario.gram, scenario.outer);
            row.terminal_error = r.terminal_error;
            row.control_energy = r.control_energy;
            row.outer_iters = r.outer_iterations;
            row.identity_residual = r.identity_residual;
        } catch (const std::exception& e) {
            row.ok = false;
            row.message = e.what();
            row.terminal_error = std::nan("");
            row.control_energy = std::nan("");
            row.identity_residual = std::nan("");
        }
    }
    return rows;
}

double fitted_decay_slope(std::span<const SweepRow> rows) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& r : rows) {
        if (!r.ok || !(r.terminal_error > 0.0)) continue;
        const double x = std::log(r.lambda);
        const double y = std::log(r.terminal_error);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) return std::nan("");
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

bool strictly_decreasing_errors(std::span<const SweepRow> rows) {
    // Failed rows are skipped; the remaining errors must drop strictly.
    const SweepRow* prev = nullptr;
    for (const auto& r : rows) {
        if (!r.ok) continue;
        if (prev && !(r.terminal_error < prev->terminal_error)) return false;
        prev = &r;
    }
    return true;
}

PerturbationReport optimality_perturbation_test(const Trajectory& x_star, const ControlSignal& u_star,
                                                const ModeVector& d, double lambda, const ResolventTable& table,
                                                const Eigen::MatrixXd& bmat, int n_random, double eps,
                                                std::uint64_t seed) {
    if (!(eps > 0.0)) throw InputError("optimality_perturbation_test: eps must be > 0");
    const ModeVector x0 = x_star.states.front();
    const int steps = table.grid().n_steps;
    auto cost_of = [&](const ControlSignal& u) {
        const ModeVector xt = linear_terminal_state(table, bmat, x0, u);
        return (xt - d).squaredNorm() + lambda * u.energy();
    };

    PerturbationReport report;
    report.cost = cost_functional(x_star, u_star, d, lambda);
    report.tolerance = 1e-4 * (1.0 + std::abs(report.cost));
    report.min_increase = HUGE_VAL;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int k = 0; k < n_random; ++k) {
        ControlSignal v{u_star.grid, std::vector<ModeVector>(steps + 1)};
        for (auto& s : v.samples) {
            s.resize(table.n_modes());
            for (Eigen::Index m = 0; m < s.size(); ++m) s[m] = normal(rng);
        }
        const double scale = std::sqrt(v.energy());
        if (scale > 0.0)
            for (auto& s : v.samples) s /= scale;
        ControlSignal plus = u_star, minus = u_star;
        for (int i = 0; i <= steps; ++i) {
            plus.samples[i] += eps * v.samples[i];
            minus.samples[i] -= eps * v.samples[i];
        }
        const double gp = cost_of(plus);
        const double gm = cost_of(minus);
        report.max_central_difference = std::max(report.max_central_difference, std::abs(gp - gm) / (2.0 * eps));
        report.min_increase = std::min({report.min_increase, gp - report.cost, gm - report.cost});
    }
    if (n_random == 0) report.min_increase = 0.0;
    report.passed = report.max_central_difference <= report.tolerance && report.min_increase >= -1e-10;
    return report;
}

}  // namespace memctl
