#pragma once

// Finite-dimensional l^p duality mapping and the monotone equation
//   lambda z + M J_p(z) = lambda x,   M symmetric positive semidefinite.

#include <Eigen/Dense>

#include <vector>

namespace memctl::duality {

struct PNormSpace {
    int dim = 1;
    double p = 2.0;

    void validate() const;
    double conjugate() const { return p / (p - 1.0); }
};

double p_norm(const Eigen::VectorXd& x, double p);

/// J_p(x)_i = ||x||_p^{2-p} |x_i|^{p-2} x_i, J_p(0) = 0.
Eigen::VectorXd duality_map(const Eigen::VectorXd& x, double p);

struct MonotoneSolveResult {
    Eigen::VectorXd z;
    double residual = 0.0;  ///< ||lambda z + M J(z) - lambda x||_2
    int iterations = 0;
};

/// Solved on the dual variable y = J_p(z) (z = J_q(y)), where the equation is the gradient of
/// a strictly convex function: damped Newton with backtracking, falling back to a damped
/// fixed-point step halved on residual increase. Converged when residual <= 1e-8 ||lambda x||.
MonotoneSolveResult monotone_solve(double lambda, const Eigen::MatrixXd& m, const Eigen::VectorXd& x, double p,
                                   int max_steps = 100000);

struct DecayReport {
    std::vector<double> lambdas;
    std::vector<double> solution_norms;  ///< ||lambda R(lambda, M) x||_p = ||z(lambda)||_p
    double x_norm = 0.0;
    bool contraction_holds = true;       ///< ||z||_p <= ||x||_p for every lambda
    bool decreasing = true;              ///< ||z||_p strictly decreasing along the list
};

DecayReport contraction_and_decay_check(const Eigen::MatrixXd& m, const Eigen::VectorXd& x, double p,
                                        const std::vector<double>& lambdas);

}  // namespace memctl::duality
