#include "memctl/mild_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace memctl {

double Nonlinearity::operator()(double /*t*/, double y, double dy) const {
    switch (kind) {
        case NonlinearityKind::zero:
            return 0.0;
        case NonlinearityKind::kappa_sin:
            return kappa * std::sin(y);
        case NonlinearityKind::kappa_bounded_rational:
            return kappa * dy / (1.0 + dy * dy);
    }
    return 0.0;
}

double Nonlinearity::bound() const {
    switch (kind) {
        case NonlinearityKind::zero:
            return 0.0;
        case NonlinearityKind::kappa_sin:
            return std::abs(kappa);
        case NonlinearityKind::kappa_bounded_rational:
            return 0.5 * std::abs(kappa);
    }
    return 0.0;
}

ControlSignal ControlSignal::zero(const TimeGrid& grid, int n_modes) {
    return ControlSignal{grid, std::vector<ModeVector>(grid.n_steps + 1, ModeVector::Zero(n_modes))};
}

namespace {

template <class F>
double trapezoid_nodes(const TimeGrid& grid, F&& f) {
    double acc = 0.5 * (f(0) + f(grid.n_steps));
    for (int j = 1; j < grid.n_steps; ++j) acc += f(j);
    return acc * grid.step();
}

}  // namespace

double ControlSignal::energy() const {
    return trapezoid_nodes(grid, [&](int j) { return samples[j].squaredNorm(); });
}

double ControlSignal::l1_norm() const {
    return trapezoid_nodes(grid, [&](int j) { return samples[j].norm(); });
}

ModeVector ControlSignal::at(double t) const {
    return Trajectory{grid, samples}.at(t);
}

void DelayProblem::validate() const {
    basis.validate();
    grid.validate();
    coeffs.validate(grid.tau);
    if (phi.n_modes() != basis.n_modes) throw InputError("problem: history mode count does not match basis");
    if (!law.sigma) throw InputError("problem: delay law is not set");
    if (!(a1 >= 0.0 && a1 < a2 && a2 <= std::numbers::pi))
        throw InputError("problem: actuator window needs 0 <= a1 < a2 <= pi");
}

Eigen::MatrixXd DelayProblem::actuator() const { return control_matrix(a1, a2, basis.n_modes); }

ModeVector evaluate_nonlinearity(double t, const ModeVector& head, const DelayProblem& problem,
                                 const CollocationTransform& transform) {
    const int n_modes = problem.basis.n_modes;
    if (problem.nonlinearity.kind == NonlinearityKind::zero) return ModeVector::Zero(n_modes);
    const auto y = transform.values(head);
    const auto dy = transform.derivative(head);
    std::vector<double> h(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) {
        h[j] = problem.nonlinearity(t, y[j], dy[j]);
        if (!std::isfinite(h[j]))
            throw NumericalError("nonlinearity: non-finite value at t = " + std::to_string(t) +
                                 ", collocation node " + std::to_string(j));
    }
    ModeVector out = transform.project(h);
    const double cap = problem.nonlinearity.bound() * std::sqrt(std::numbers::pi);
    if (out.norm() > cap * (1.0 + 1e-6) + 1e-14)
        throw InvariantViolation("nonlinearity: ||F|| = " + std::to_string(out.norm()) +
                                 " exceeds M_h sqrt(pi) = " + std::to_string(cap));
    return out;
}

ModeVector evaluate_nonlinearity(double t, const HistorySegment& psi, const DelayProblem& problem) {
    return evaluate_nonlinearity(t, psi.head(), problem, CollocationTransform(problem.basis));
}

namespace {

void check_affine_inputs(const ResolventTable& table, const ModeVector& x0,
                         const std::vector<ModeVector>& forcing) {
    if (x0.size() != table.n_modes()) throw InputError("mild solve: x0 has wrong mode count");
    if (static_cast<int>(forcing.size()) != table.grid().n_steps + 1)
        throw InputError("mild solve: forcing must be sampled on every grid node");
    for (const auto& f : forcing)
        if (f.size() != table.n_modes()) throw InputError("mild solve: forcing has wrong mode count");
}

ModeVector affine_node(const ResolventTable& table, const ModeVector& x0,
                       const std::vector<ModeVector>& forcing, int j) {
    const int n_modes = table.n_modes();
    const double h = table.grid().step();
    ModeVector out(n_modes);
    for (int n = 1; n <= n_modes; ++n) {
        double acc = 0.0;
        if (j > 0) {
            acc = 0.5 * (table(n, j, 0) * forcing[0][n - 1] + forcing[j][n - 1]);
            for (int i = 1; i < j; ++i) acc += table(n, j, i) * forcing[i][n - 1];
            acc *= h;
        }
        out[n - 1] = table(n, j, 0) * x0[n - 1] + acc;
    }
    return out;
}

}  // namespace

Trajectory affine_mild_solve(const ResolventTable& table, const ModeVector& x0,
                             const std::vector<ModeVector>& forcing) {
    check_affine_inputs(table, x0, forcing);
    const int steps = table.grid().n_steps;
    Trajectory x{table.grid(), std::vector<ModeVector>(steps + 1)};
#pragma omp parallel for schedule(dynamic, 8)
    for (int j = 0; j <= steps; ++j) x.states[j] = affine_node(table, x0, forcing, j);
    return x;
}

namespace serial {
Trajectory affine_mild_solve(const ResolventTable& table, const ModeVector& x0,
                             const std::vector<ModeVector>& forcing) {
    check_affine_inputs(table, x0, forcing);
    const int steps = table.grid().n_steps;
    Trajectory x{table.grid(), {}};
    x.states.reserve(steps + 1);
    for (int j = 0; j <= steps; ++j) x.states.push_back(affine_node(table, x0, forcing, j));
    return x;
}
}  // namespace serial

ModeVector terminal_convolution(const ResolventTable& table, const std::vector<ModeVector>& forcing) {
    check_affine_inputs(table, ModeVector::Zero(table.n_modes()), forcing);
    return affine_node(table, ModeVector::Zero(table.n_modes()), forcing, table.grid().n_steps);
}

double PicardReport::final_contraction(int window) const {
    double worst = 0.0;
    const int n = static_cast<int>(changes.size());
    for (int k = std::max(1, n - window); k < n; ++k)
        if (changes[k - 1] > 0.0) worst = std::max(worst, changes[k] / changes[k - 1]);
    return worst;
}

std::vector<ModeVector> delayed_forcing(const Trajectory& x, const DelayProblem& problem,
                                        const CollocationTransform& transform) {
    const int steps = x.grid.n_steps;
    std::vector<ModeVector> out(steps + 1);
    std::string failure;
#pragma omp parallel for schedule(static)
    for (int j = 0; j <= steps; ++j) {
        try {
            const double t = x.grid.node(j);
            const double rho = delay_evaluate(t, x.states[j], problem.law);
            out[j] = evaluate_nonlinearity(t, state_at(x, problem.phi, std::min(rho, t)), problem, transform);
        } catch (const std::exception& e) {
#pragma omp critical(memctl_forcing_failure)
            if (failure.empty()) failure = e.what();
        }
    }
    if (!failure.empty()) throw NumericalError(failure);
    return out;
}

PicardResult picard_solve(const DelayProblem& problem, const ControlSignal& u, const ResolventTable& table,
                          const PicardOptions& options) {
    const TimeGrid& grid = table.grid();
    if (grid.n_steps != problem.grid.n_steps || grid.tau != problem.grid.tau)
        throw InputError("picard_solve: resolvent table does not cover the problem grid");
    if (table.n_modes() != problem.basis.n_modes) throw InputError("picard_solve: mode count mismatch");
    if (static_cast<int>(u.samples.size()) != grid.n_steps + 1)
        throw InputError("picard_solve: control must be sampled on the grid");

    const CollocationTransform transform(problem.basis);
    const Eigen::MatrixXd b = problem.actuator();
    const ModeVector x0 = problem.phi.head();

    std::vector<ModeVector> control_forcing(grid.n_steps + 1);
    for (int j = 0; j <= grid.n_steps; ++j) control_forcing[j] = b * u.samples[j];

    PicardResult result;
    result.trajectory = affine_mild_solve(table, x0, control_forcing);
    std::vector<ModeVector> total(grid.n_steps + 1);
    for (int it = 1; it <= options.max_iter; ++it) {
        result.forcing = delayed_forcing(result.trajectory, problem, transform);
        for (int j = 0; j <= grid.n_steps; ++j) total[j] = control_forcing[j] + result.forcing[j];
        Trajectory next = affine_mild_solve(table, x0, total);
        double change = 0.0;
        for (int j = 0; j <= grid.n_steps; ++j)
            change = std::max(change, (next.states[j] - result.trajectory.states[j]).norm());
        result.trajectory = std::move(next);
        result.report.changes.push_back(change);
        result.report.iterations = it;
        if (!std::isfinite(change)) break;
        if (change <= options.tol) {
            result.report.converged = true;
            break;
        }
    }
    if (!result.report.converged)
        throw PicardDivergence("picard_solve: no convergence after " +
                                   std::to_string(result.report.iterations) + " iterations",
                               result.report.changes);

    // A-priori bound ||x(t)|| <= sup||R|| (||phi(0)|| + ||B|| int ||u|| + M_h sqrt(pi) t).
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b, Eigen::EigenvaluesOnly);
    const double b_norm = eig.eigenvalues().cwiseAbs().maxCoeff();
    const double r_norm = max_operator_norm(table);
    const double f_cap = problem.nonlinearity.bound() * std::sqrt(std::numbers::pi);
    double worst = 0.0;
    double u_integral = 0.0;
    for (int j = 0; j <= grid.n_steps; ++j) {
        if (j > 0) u_integral += 0.5 * grid.step() * (u.samples[j - 1].norm() + u.samples[j].norm());
        const double bound = r_norm * (x0.norm() + b_norm * u_integral + f_cap * grid.node(j));
        const double norm = result.trajectory.states[j].norm();
        if (norm > 0.0) worst = std::max(worst, bound > 0.0 ? norm / bound : HUGE_VAL);
    }
    result.report.bound_ratio = worst;
    if (worst > 1.0 + 1e-9)
        throw InvariantViolation("picard_solve: trajectory exceeds the a-priori resolvent bound (ratio " +
                                 std::to_string(worst) + ")");
    return result;
}

double smallness_condition(double c_alpha_beta, double n_beta, double h3, double delta_bar, double tau,
                           double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw InputError("smallness_condition: beta must lie in (0, 1)");
    return c_alpha_beta * n_beta * h3 * delta_bar * std::pow(tau, 1.0 - beta) / (1.0 - beta);
}

Trajectory method_of_steps_oracle(const DelayProblem& problem, const ControlSignal& u, int fine_steps) {
    if (!problem.law.constant_lag) throw InputError("method_of_steps_oracle: delay law must be constant");
    const double lag = *problem.law.constant_lag;
    const TimeGrid coarse = problem.grid;
    if (fine_steps < 4 * coarse.n_steps || fine_steps % coarse.n_steps != 0)
        throw InputError("method_of_steps_oracle: fine_steps must be a multiple of n_steps and >= 4x it");

    const TimeGrid fine = TimeGrid::make(coarse.tau, fine_steps);
    const int n_modes = problem.basis.n_modes;
    const double h = fine.step();
    const CollocationTransform transform(problem.basis);
    const Eigen::MatrixXd b = problem.actuator();
    Eigen::VectorXd nn(n_modes);
    for (int n = 1; n <= n_modes; ++n) nn[n - 1] = static_cast<double>(n) * n;

    std::vector<ModeVector> x(fine_steps + 1);
    x[0] = problem.phi.head();

    // Reads x(time) from history, computed fine nodes, or the current step's predictor.
    auto read = [&](double time, int known, const ModeVector* predictor) -> ModeVector {
        if (time < 0.0) return problem.phi.at(time);
        const double pos = time / h;
        if (pos <= known) {
            const int k = std::min(static_cast<int>(std::floor(pos)), known);
            if (k == known) return x[k];
            const double w = pos - k;
            return (1.0 - w) * x[k] + w * x[k + 1];
        }
        const double w = std::min(pos - known, 1.0);
        return (1.0 - w) * x[known] + w * (predictor ? *predictor : x[known]);
    };
    auto forcing = [&](int k, int known, const ModeVector* predictor) {
        const double t = fine.node(k);
        ModeVector f = b * u.at(t);
        f += evaluate_nonlinearity(t, read(t - lag, known, predictor), problem, transform);
        return f;
    };

    std::vector<double> row;
    ModeVector memory_k = ModeVector::Zero(n_modes);
    ModeVector f_k = forcing(0, 0, nullptr);
    for (int k = 0; k < fine_steps; ++k) {
        const double t0 = fine.node(k);
        const double t1 = fine.node(k + 1);
        const double b_int = h / 6.0 * (problem.coeffs.b(t0) + 4.0 * problem.coeffs.b(t0 + 0.5 * h) +
                                        problem.coeffs.b(t1));
        const Eigen::ArrayXd e = (-nn.array() * h + b_int).exp();

        row.resize(k + 2);
        for (int m = 0; m <= k + 1; ++m) row[m] = problem.coeffs.kernel(t1, fine.node(m));
        ModeVector known = 0.5 * row[0] * x[0];
        for (int m = 1; m <= k; ++m) known += row[m] * x[m];
        known = (-h) * nn.cwiseProduct(known);
        const Eigen::ArrayXd diag = -nn.array() * 0.5 * h * row[k + 1];

        const Eigen::ArrayXd base = e * x[k].array() + 0.5 * h * (e * (memory_k + f_k).array() + known.array());
        auto advance = [&](const ModeVector& f_next) -> ModeVector {
            return ((base + 0.5 * h * f_next.array()) / (1.0 - 0.5 * h * diag)).matrix();
        };
        ModeVector f_next = forcing(k + 1, k, nullptr);
        ModeVector next = advance(f_next);
        if (t1 - lag > t0) {
            f_next = forcing(k + 1, k, &next);
            next = advance(f_next);
        }
        if (!next.allFinite()) throw NumericalError("method_of_steps_oracle: non-finite state at step " + std::to_string(k + 1));
        x[k + 1] = next;
        memory_k = known + (diag * next.array()).matrix();
        f_k = f_next;
    }

    const int stride = fine_steps / coarse.n_steps;
    Trajectory out{coarse, {}};
    out.states.reserve(coarse.n_steps + 1);
    for (int j = 0; j <= coarse.n_steps; ++j) out.states.push_back(x[j * stride]);
    return out;
}

double sup_distance(const Trajectory& a, const Trajectory& b) {
    if (a.states.size() != b.states.size()) throw InputError("sup_distance: trajectories on different grids");
    double worst = 0.0;
    for (std::size_t j = 0; j < a.states.size(); ++j) worst = std::max(worst, (a.states[j] - b.states[j]).norm());
    return worst;
}

}  // namespace memctl
