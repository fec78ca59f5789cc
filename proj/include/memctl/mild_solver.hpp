#pragma once

// Mild solutions of the controlled delay problem
//   x(t) = R(t, 0) phi(0) + int_0^t R(t, s) [B u(s) + F(s, x_{rho(s, x_s)})] ds,
// where F(t, psi)(xi) = h(t, psi(0)(xi), d/dxi psi(0)(xi)).

#include "memctl/errors.hpp"
#include "memctl/phase_space.hpp"
#include "memctl/resolvent.hpp"
#include "memctl/spectral.hpp"

#include <string>
#include <vector>

namespace memctl {

enum class NonlinearityKind { zero, kappa_sin, kappa_bounded_rational };

/// Pointwise nonlinearity h(t, y, y').
struct Nonlinearity {
    NonlinearityKind kind = NonlinearityKind::zero;
    double kappa = 0.0;

    /// kappa_sin:              h = kappa sin(y)
    /// kappa_bounded_rational: h = kappa y' / (1 + y'^2)
    double operator()(double t, double y, double dy) const;
    /// sup |h|, the constant M_h.
    double bound() const;
};

/// Time samples of a control u(t) (control space = state space).
struct ControlSignal {
    TimeGrid grid;
    std::vector<ModeVector> samples;

    static ControlSignal zero(const TimeGrid& grid, int n_modes);
    /// Trapezoidal int_0^tau ||u(t)||^2 dt.
    double energy() const;
    /// Trapezoidal int_0^tau ||u(t)|| dt.
    double l1_norm() const;
    /// Linear interpolation between nodes.
    ModeVector at(double t) const;
};

struct DelayProblem {
    BasisSpec basis;
    TimeGrid grid;
    CoefficientFunctions coeffs;
    HistorySegment phi;
    DelayLaw law;
    Nonlinearity nonlinearity;
    double a1 = 0.0;
    double a2 = 0.0;

    void validate() const;
    Eigen::MatrixXd actuator() const;
};

/// F(t, psi) for a history whose value at theta = 0 is head.
ModeVector evaluate_nonlinearity(double t, const ModeVector& head, const DelayProblem& problem,
                                 const CollocationTransform& transform);
ModeVector evaluate_nonlinearity(double t, const HistorySegment& psi, const DelayProblem& problem);

/// x(t_j) = R(t_j, 0) x0 + int_0^{t_j} R(t_j, s) f(s) ds, trapezoid in s.
/// OpenMP-parallel over output nodes.
Trajectory affine_mild_solve(const ResolventTable& table, const ModeVector& x0,
                             const std::vector<ModeVector>& forcing);

/// int_0^tau R(tau, s) f(s) ds by the same trapezoid.
ModeVector terminal_convolution(const ResolventTable& table, const std::vector<ModeVector>& forcing);

struct PicardOptions {
    double tol = 1e-10;
    int max_iter = 200;
};

struct PicardReport {
    std::vector<double> changes;  ///< sup-node change per iteration
    int iterations = 0;
    bool converged = false;
    double bound_ratio = 0.0;     ///< max_t ||x(t)|| / a-priori bound

    /// Largest ratio of successive changes over the last `window` iterations
    /// (only nonzero predecessors count); 0 when fewer than two changes exist.
    double final_contraction(int window = 5) const;
};

class PicardDivergence : public NumericalError {
public:
    PicardDivergence(const std::string& what, std::vector<double> changes)
        : NumericalError(what), changes_(std::move(changes)) {}
    const std::vector<double>& changes() const { return changes_; }

private:
    std::vector<double> changes_;
};

struct PicardResult {
    Trajectory trajectory;
    PicardReport report;
    std::vector<ModeVector> forcing;  ///< F(s, x_rho) at each node, from the final iterate
};

/// Nonlinearity samples F(t_j, x_{rho(t_j, x_{t_j})}) for a trajectory.
std::vector<ModeVector> delayed_forcing(const Trajectory& x, const DelayProblem& problem,
                                        const CollocationTransform& transform);

/// Picard iteration on the mild-solution map; starts from the affine (F = 0) solution.
PicardResult picard_solve(const DelayProblem& problem, const ControlSignal& u, const ResolventTable& table,
                          const PicardOptions& options = {});

/// C_{alpha,beta} N_beta H3 delta_bar tau^{1-beta} / (1 - beta); the fixed-point map is a
/// self-map of a ball when this is < 1.
double smallness_condition(double c_alpha_beta, double n_beta, double h3, double delta_bar, double tau,
                           double beta);

/// Direct time marching for a constant lag: delayed values read from the already
/// computed past, memory term by trapezoid, no resolvent. Result sampled on problem.grid.
Trajectory method_of_steps_oracle(const DelayProblem& problem, const ControlSignal& u, int fine_steps);

/// max_j ||a(t_j) - b(t_j)|| on a common grid.
double sup_distance(const Trajectory& a, const Trajectory& b);

namespace serial {
Trajectory affine_mild_solve(const ResolventTable& table, const ModeVector& x0,
                             const std::vector<ModeVector>& forcing);
}  // namespace serial

}  // namespace memctl
