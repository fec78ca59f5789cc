#include "memctl/duality.hpp"

#include "memctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace memctl::duality {

void PNormSpace::validate() const {
    if (dim < 1) throw InputError("p-norm space: dim must be >= 1");
    if (!(p > 1.0) || !std::isfinite(p)) throw InputError("p-norm space: p must lie in (1, inf)");
}

double p_norm(const Eigen::VectorXd& x, double p) {
    const double scale = x.cwiseAbs().maxCoeff();
    if (scale == 0.0 || x.size() == 0) return 0.0;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) acc += std::pow(std::abs(x[i]) / scale, p);
    return scale * std::pow(acc, 1.0 / p);
}

Eigen::VectorXd duality_map(const Eigen::VectorXd& x, double p) {
    PNormSpace{static_cast<int>(std::max<Eigen::Index>(x.size(), 1)), p}.validate();
    const double norm = p_norm(x, p);
    Eigen::VectorXd j = Eigen::VectorXd::Zero(x.size());
    if (norm == 0.0) return j;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] == 0.0) continue;
        // ||x||^{2-p} |x_i|^{p-2} x_i = ||x|| (|x_i| / ||x||)^{p-1} sign(x_i)
        j[i] = norm * std::pow(std::abs(x[i]) / norm, p - 1.0) * (x[i] > 0.0 ? 1.0 : -1.0);
    }
    return j;
}

MonotoneSolveResult monotone_solve(double lambda, const Eigen::MatrixXd& m, const Eigen::VectorXd& x, double p,
                                   int max_steps) {
    if (!(lambda > 0.0)) throw InputError("monotone_solve: lambda must be > 0");
    PNormSpace{static_cast<int>(x.size()), p}.validate();
    if (m.rows() != x.size() || m.cols() != x.size()) throw InputError("monotone_solve: M must be dim x dim");
    const double q = p / (p - 1.0);

    // With y = J_p(z) the equation reads lambda J_q(y) + M y = lambda x, the gradient
    // of the strictly convex lambda/2 ||y||_q^2 + 1/2 y^T M y - lambda x^T y.
    const Eigen::VectorXd target = lambda * x;
    const double tol = 1e-8 * target.norm();
    auto residual_of = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
        return lambda * duality_map(y, q) + m * y - target;
    };

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    const double m_norm = eig.eigenvalues().cwiseAbs().maxCoeff();
    double step = lambda / ((lambda + m_norm) * (lambda + m_norm));
    const Eigen::Index n = x.size();

    auto objective = [&](const Eigen::VectorXd& y) {
        const double nq = p_norm(y, q);
        return 0.5 * lambda * nq * nq + 0.5 * y.dot(m * y) - target.dot(y);
    };
    // Hessian of lambda/2 ||y||_q^2 + 1/2 y^T M y; coordinates at zero are floored
    // so that q < 2 gives a large but finite curvature.
    auto hessian = [&](const Eigen::VectorXd& y) {
        Eigen::MatrixXd h = 0.5 * (m + m.transpose());
        const double nq = p_norm(y, q);
        if (nq > 0.0) {
            const double floor = 1e-12 * y.cwiseAbs().maxCoeff();
            Eigen::VectorXd v(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double a = std::max(std::abs(y[i]), floor) / nq;
                v[i] = std::pow(std::abs(y[i]) / nq, q - 1.0) * (y[i] < 0.0 ? -1.0 : 1.0);
                h(i, i) += lambda * (q - 1.0) * std::pow(a, q - 2.0);
            }
            h += lambda * (2.0 - q) * v * v.transpose();
        } else {
            h += lambda * Eigen::MatrixXd::Identity(n, n);
        }
        return h;
    };

    MonotoneSolveResult out;
    Eigen::VectorXd y = duality_map(x, p);
    Eigen::VectorXd r = residual_of(y);
    double rn = r.norm();
    int k = 0;
    while (rn > tol && k < max_steps) {
        ++k;
        // Damped Newton on the convex objective, Armijo backtracking.
        const Eigen::MatrixXd h = hessian(y);
        const Eigen::VectorXd dir = -h.ldlt().solve(r);
        const double slope = r.dot(dir);
        bool moved = false;
        if (dir.allFinite() && slope < 0.0) {
            const double f0 = objective(y);
            for (double t = 1.0; t > 1e-12; t *= 0.5) {
                const Eigen::VectorXd trial = y + t * dir;
                if (objective(trial) <= f0 + 1e-4 * t * slope) {
                    y = trial;
                    moved = true;
                    break;
                }
            }
        }
        if (!moved) {
            // Fallback: damped fixed-point step, halved until the residual drops.
            while (step > 1e-300) {
                const Eigen::VectorXd trial = y - step * r;
                if (residual_of(trial).norm() < rn) {
                    y = trial;
                    step *= 1.25;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
        r = residual_of(y);
        rn = r.norm();
    }
    out.z = duality_map(y, q);
    out.residual = (lambda * out.z + m * duality_map(out.z, p) - target).norm();
    out.iterations = k;
    if (!(out.residual <= tol) && target.norm() > 0.0)
        throw NumericalError("monotone_solve: stagnated after " + std::to_string(k) + " steps, residual " +
                             std::to_string(out.residual));
    return out;
}

DecayReport contraction_and_decay_check(const Eigen::MatrixXd& m, const Eigen::VectorXd& x, double p,
                                        const std::vector<double>& lambdas) {
    DecayReport report;
    report.lambdas = lambdas;
    report.x_norm = p_norm(x, p);
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        if (k > 0 && !(lambdas[k] < lambdas[k - 1]))
            throw InputError("contraction_and_decay_check: lambdas must be decreasing");
        const auto sol = monotone_solve(lambdas[k], m, x, p);
        const double zn = p_norm(sol.z, p);
        report.solution_norms.push_back(zn);
        if (zn > report.x_norm * (1.0 + 1e-10)) report.contraction_holds = false;
        if (k > 0 && !(zn < report.solution_norms[k - 1])) report.decreasing = false;
    }
    return report;
}

}  // namespace memctl::duality
