#pragma once

// Sine-basis representation of the 1-D heat-with-memory model on (0, pi):
//   e_n(xi) = sqrt(2/pi) sin(n xi),  A(t) = -d^2/dxi^2 - b(t),  G(t,s) = C(t,s) d^2/dxi^2.
// All operators are diagonal in this basis except the actuator restriction B.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace memctl {

/// Coefficients of a state in the truncated basis {e_1, ..., e_N}.
using ModeVector = Eigen::VectorXd;

struct BasisSpec {
    int n_modes = 32;
    /// Number of quadrature intervals on [0, pi]; nodes xi_j = j pi / M, j = 0..M.
    int collocation_points = 64;

    void validate() const;
    static BasisSpec with_modes(int n_modes);
};

/// Reaction coefficient b(t) and memory kernel C(t, s) of the model.
struct CoefficientFunctions {
    std::function<double(double)> b;
    std::function<double(double, double)> kernel;
    /// Partial derivative of the kernel in its second argument, dC(t, s)/ds.
    std::function<double(double, double)> kernel_ds;
    /// Upper bound on |dC/dt| over the sampled domain (reported only).
    double kernel_dt_bound = 0.0;

    /// b(t) = b0 + b1 sin t,  C(t, s) = c0 exp(-decay (t - s)).
    static CoefficientFunctions smooth(double b0, double b1, double c0, double decay);
    /// Constant coefficients b(t) = b0, C(t, s) = c0.
    static CoefficientFunctions constant(double b0, double c0);
    /// Default heat-with-memory instance: b(t) = -2 - 0.1 sin t, C(t, s) = 0.5 exp(-(t - s)).
    static CoefficientFunctions heat_default();

    /// Checks b(t) < -1 and finiteness of the kernel on a uniform sample of [0, tau].
    void validate(double tau, int samples = 256) const;
};

/// Collocation nodes xi_j = j pi / M, j = 0..M.
std::vector<double> collocation_nodes(const BasisSpec& basis);

/// Composite Simpson weights on M uniform intervals of [0, pi] (3/8 closure when M is odd).
std::vector<double> simpson_weights(int intervals, double length);

/// Coefficients <f, e_n> by composite Simpson quadrature on the collocation nodes.
ModeVector project(const std::function<double(double)>& f, const BasisSpec& basis);

/// Same as project() for values already sampled at collocation_nodes(basis).
ModeVector project_samples(std::span<const double> values, const BasisSpec& basis);

/// Physical values sum_n c_n e_n(xi_j) at the collocation nodes.
std::vector<double> synthesize(const ModeVector& coeffs, const BasisSpec& basis);

/// Physical derivative sum_n c_n e_n'(xi_j) at the collocation nodes.
std::vector<double> synthesize_derivative(const ModeVector& coeffs, const BasisSpec& basis);

/// Cached sine/cosine tables for repeated transforms on one basis.
class CollocationTransform {
public:
    explicit CollocationTransform(const BasisSpec& basis);

    const BasisSpec& basis() const { return basis_; }
    std::vector<double> values(const ModeVector& coeffs) const;
    std::vector<double> derivative(const ModeVector& coeffs) const;
    ModeVector project(std::span<const double> values) const;

private:
    BasisSpec basis_;
    Eigen::MatrixXd sine_;    // (M + 1) x N, e_n(xi_j)
    Eigen::MatrixXd cosine_;  // (M + 1) x N, e_n'(xi_j)
    Eigen::VectorXd weights_;
};

/// Pointwise value of the series at xi.
double evaluate_at(const ModeVector& coeffs, double xi);

/// Eigenvalue of A(t0) on mode n: n^2 - b(t0).
double mode_eigenvalue(int n, double t0, const CoefficientFunctions& coeffs);

/// A^alpha(t0) x, scaling mode n by (n^2 - b(t0))^alpha. alpha in (-1, 1] \ {0}.
ModeVector fractional_power_apply(const ModeVector& x, double alpha, double t0,
                                  const CoefficientFunctions& coeffs);

/// Matrix of the actuator restriction chi_(a1,a2) in the sine basis:
/// entry (m, n) = (2/pi) int_{a1}^{a2} sin(m xi) sin(n xi) dxi, in closed form.
Eigen::MatrixXd control_matrix(double a1, double a2, int n_modes);

/// sup over t, s of ||A^alpha(t) A^{-beta}(s)|| on the sampled grid of [0, tau].
double fractional_ratio_bound(double alpha, double beta, double tau, int n_modes,
                              const CoefficientFunctions& coeffs, int samples = 64);

}  // namespace memctl
