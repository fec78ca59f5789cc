#pragma once

// Controllability Gramian B_tau = int_0^tau R(tau, t) B B* R(tau, t)* dt and the
// lambda-regularized steering control built from (lambda I + B_tau)^{-1}.
// The state space is Hilbert here, so the duality map is the identity.

#include "memctl/mild_solver.hpp"
#include "memctl/resolvent.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace memctl {

struct GramianMatrix {
    Eigen::MatrixXd entries;
    double tau = 0.0;

    double trace() const { return entries.trace(); }
    double min_eigenvalue() const;
    /// max |G - G^T|
    double asymmetry() const;
};

/// Trapezoid over the grid of D(tau, t) B B^T D(tau, t), D the diagonal resolvent slice.
/// Symmetrized after assembly. OpenMP-parallel over rows.
GramianMatrix assemble_gramian(const ResolventTable& table, const Eigen::MatrixXd& bmat);

/// Solves lambda z + G z = lambda rhs (Cholesky); residual certified to 1e-8 relative.
ModeVector regularized_solve(double lambda, const GramianMatrix& gram, const ModeVector& rhs);

/// (lambda I + G)^{-1} w, the resolvent of the Gramian applied to a steering residual.
ModeVector gramian_resolvent(double lambda, const GramianMatrix& gram, const ModeVector& w);

/// u(t_j) = B D(tau, t_j) z.
ControlSignal control_from_vector(const ResolventTable& table, const Eigen::MatrixXd& bmat, const ModeVector& z);

struct SteeringResult {
    ControlSignal u;
    Trajectory x;
    ModeVector z;                    ///< (lambda I + B_tau)^{-1} p, terminal state is d - lambda z
    double terminal_error = 0.0;     ///< ||x(tau) - d||
    double identity_residual = 0.0;  ///< ||(x(tau) - d) + lambda z||
    double control_energy = 0.0;     ///< int ||u||^2
    int outer_iterations = 0;
    std::vector<double> outer_changes;
    bool relaxed = false;
};

SteeringResult linear_optimal_control(double lambda, const ResolventTable& table, const Eigen::MatrixXd& bmat,
                                      const GramianMatrix& gram, const ModeVector& x0, const ModeVector& d);

struct OuterLoopOptions {
    double tol = 1e-8;
    int max_outer = 50;
    double relaxation = 1.0;
    /// Retry once with this relaxation factor when the plain iteration fails.
    double retry_relaxation = 0.5;
    PicardOptions picard{};
};

/// Fixed point on the nonlinear steering residual
///   p(x) = d - R(tau, 0) phi(0) - int_0^tau R(tau, s) F(s, x_rho) ds,
/// alternating control synthesis and Picard solves.
SteeringResult nonlinear_control_loop(double lambda, const DelayProblem& problem, const ModeVector& d,
                                      const ResolventTable& table, const GramianMatrix& gram,
                                      const OuterLoopOptions& options = {});

/// G_lambda = ||x(tau) - d||^2 + lambda int ||u||^2.
double cost_functional(const Trajectory& x, const ControlSignal& u, const ModeVector& d, double lambda);

struct SweepRow {
    double lambda = 0.0;
    double terminal_error = 0.0;
    double control_energy = 0.0;
    int outer_iters = 0;
    double identity_residual = 0.0;
    bool ok = true;
    std::string message;
};

enum class SteeringKind { linear, nonlinear };

/// Inputs shared by every row of a lambda sweep.
struct SteeringScenario {
    SteeringKind kind = SteeringKind::linear;
    const DelayProblem* problem = nullptr;  ///< required for nonlinear rows
    const ResolventTable* table = nullptr;
    Eigen::MatrixXd bmat;
    GramianMatrix gram;
    ModeVector x0;
    ModeVector d;
    OuterLoopOptions outer{};
};

/// Independent rows, parallel over lambda; failed rows are marked and the sweep continues.
std::vector<SweepRow> lambda_sweep(std::span<const double> lambdas, const SteeringScenario& scenario);

/// Least-squares slope of log(terminal_error) against log(lambda) over successful rows.
double fitted_decay_slope(std::span<const SweepRow> rows);
/// Over successful rows only.
bool strictly_decreasing_errors(std::span<const SweepRow> rows);

struct PerturbationReport {
    double max_central_difference = 0.0;
    double cost = 0.0;
    double min_increase = 0.0;  ///< min over directions of G(u* +- eps v) - G(u*)
    double tolerance = 0.0;     ///< 1e-4 (1 + |G(u*)|)
    bool passed = false;
};

/// Central differences of G_lambda at u* along n_random unit directions (linear dynamics).
PerturbationReport optimality_perturbation_test(const Trajectory& x_star, const ControlSignal& u_star,
                                                const ModeVector& d, double lambda, const ResolventTable& table,
                                                const Eigen::MatrixXd& bmat, int n_random, double eps,
                                                std::uint64_t seed);

/// Terminal state of the linear dynamics under control u: R(tau, 0) x0 + int R(tau, s) B u(s) ds.
ModeVector linear_terminal_state(const ResolventTable& table, const Eigen::MatrixXd& bmat, const ModeVector& x0,
                                 const ControlSignal& u);

namespace serial {
GramianMatrix assemble_gramian(const ResolventTable& table, const Eigen::MatrixXd& bmat);
}  // namespace serial

}  // namespace memctl
