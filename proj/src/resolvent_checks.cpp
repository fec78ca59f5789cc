#include "memctl/errors.hpp"
#include "memctl/resolvent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace memctl {

namespace {

// Cumulative trapezoid of f over nodes i..j (f indexed by absolute node).
template <class F>
void cumulative_trapezoid(int i, int steps, double h, F&& f, std::vector<double>& out) {
    out.assign(steps + 1, 0.0);
    double prev = f(i);
    for (int k = i + 1; k <= steps; ++k) {
        const double cur = f(k);
        out[k] = out[k - 1] + 0.5 * h * (prev + cur);
        prev = cur;
    }
}

// Builds the Volterra kernel
//   K(r, s) = sign * [ g(r, r) int_s^r V(v, s) dv - int_s^r dg/dv(r, v) int_s^v V(w, s) dw dv ]
// with g = -n^2 C for the propagator V, then the defect
//   max | lhs(t, s) - rhs(t, s) - int_s^t W(t, r) K(r, s) dr |.
template <class Integrand, class Lhs, class Rhs, class Outer>
IdentityCheck kernel_identity(const ResolventTable& table, const SampledCoefficients& sampled,
                              double sign, Integrand&& integrand, Lhs&& lhs, Rhs&& rhs, Outer&& outer) {
    const TimeGrid& grid = table.grid();
    const int steps = grid.n_steps;
    const double h = grid.step();
    const int modes = table.n_modes();
    IdentityCheck result{ModeTable(grid, modes), 0.0};
    std::vector<double> defects(static_cast<std::size_t>(modes) * (steps + 1), 0.0);

#pragma omp parallel
    {
        std::vector<double> inner;
#pragma omp for schedule(dynamic, 4)
        for (long task = 0; task < static_cast<long>(modes) * (steps + 1); ++task) {
            const int n = static_cast<int>(task / (steps + 1)) + 1;
            const int i = static_cast<int>(task % (steps + 1));
            const double nn = static_cast<double>(n) * n;
            cumulative_trapezoid(i, steps, h, [&](int k) { return integrand(n, k, i); }, inner);
            auto kernel = result.kernel.column(n, i);
            for (int r = i; r <= steps; ++r) {
                double tail = 0.0;
                if (r > i) {
                    tail = 0.5 * (sampled.c_ds(r, i) * inner[i] + sampled.c_ds(r, r) * inner[r]);
                    for (int v = i + 1; v < r; ++v) tail += sampled.c_ds(r, v) * inner[v];
                    tail *= h;
                }
                kernel[r - i] = sign * (-nn) * (sampled.c(r, r) * inner[r] - tail);
            }
            double worst = 0.0;
            for (int t = i; t <= steps; ++t) {
                double conv = 0.0;
                if (t > i) {
                    conv = 0.5 * (outer(n, t, i) * kernel[0] + outer(n, t, t) * kernel[t - i]);
                    for (int r = i + 1; r < t; ++r) conv += outer(n, t, r) * kernel[r - i];
                    conv *= h;
                }
                worst = std::max(worst, std::abs(lhs(n, t, i) - rhs(n, t, i) - conv));
            }
            defects[task] = worst;
        }
    }
    result.defect = *std::max_element(defects.begin(), defects.end());
    return result;
}

}  // namespace

IdentityCheck q_kernel_reconstruct(const ResolventTable& table, const CoefficientFunctions& coeffs) {
    const auto sampled = SampledCoefficients::sample(table.grid(), coeffs);
    auto r = [&](int n, int j, int i) { return table(n, j, i); };
    auto u = [&](int n, int j, int i) { return sampled.evolution(n, j, i); };
    return kernel_identity(table, sampled, 1.0, r, r, u, u);
}

IdentityCheck p_kernel_inverse_check(const ResolventTable& table, const CoefficientFunctions& coeffs) {
    const auto sampled = SampledCoefficients::sample(table.grid(), coeffs);
    auto r = [&](int n, int j, int i) { return table(n, j, i); };
    auto u = [&](int n, int j, int i) { return sampled.evolution(n, j, i); };
    return kernel_identity(table, sampled, -1.0, u, u, r, r);
}

double memory_free_defect(const ResolventTable& table, const CoefficientFunctions& coeffs) {
    const auto sampled = SampledCoefficients::sample(table.grid(), coeffs);
    const int steps = table.grid().n_steps;
    double worst = 0.0;
    for (int n = 1; n <= table.n_modes(); ++n)
        for (int i = 0; i <= steps; ++i)
            for (int j = i; j <= steps; ++j)
                worst = std::max(worst, std::abs(table(n, j, i) - sampled.evolution(n, j, i)));
    return worst;
}

double fractional_bound_scan(const ResolventTable& table, const CoefficientFunctions& coeffs,
                             double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw InputError("fractional_bound_scan: beta must lie in (0, 1)");
    const TimeGrid& grid = table.grid();
    double best = 0.0;
    for (int j = 1; j <= grid.n_steps; ++j) {
        const double t = grid.node(j);
        for (int n = 1; n <= table.n_modes(); ++n) {
            const double scale = std::pow(mode_eigenvalue(n, t, coeffs), beta);
            for (int i = 0; i < j; ++i) {
                const double v = std::pow(t - grid.node(i), beta) * scale * std::abs(table(n, j, i));
                best = std::max(best, v);
            }
        }
    }
    return best;
}

double cocycle_defect(const ResolventTable& table, const CoefficientFunctions& coeffs,
                      double alpha, double t0, double eps) {
    const TimeGrid& grid = table.grid();
    const int m = grid.index_of(eps);
    if (!(eps > 0.0) || m <= 0) throw InputError("cocycle_defect: eps must be a positive multiple of the grid step");
    std::vector<double> weight(table.n_modes());
    for (int n = 1; n <= table.n_modes(); ++n) weight[n - 1] = std::pow(mode_eigenvalue(n, t0, coeffs), alpha);
    double worst = 0.0;
    for (int n = 1; n <= table.n_modes(); ++n)
        for (int k = 0; k + m <= grid.n_steps; ++k)
            for (int i = 0; i <= k; ++i) {
                const double d = table(n, k + m, i) - table(n, k + m, k) * table(n, k, i);
                worst = std::max(worst, weight[n - 1] * std::abs(d));
            }
    return worst;
}

CocycleSweep cocycle_sweep(const ResolventTable& table, const CoefficientFunctions& coeffs,
                           double alpha, double beta, double t0, std::span<const double> eps_list) {
    if (!(beta > 0.0 && beta < 1.0)) throw InputError("cocycle_sweep: beta must lie in (0, 1)");
    CocycleSweep sweep;
    sweep.alpha = alpha;
    sweep.beta = beta;
    for (double eps : eps_list) {
        const double d = cocycle_defect(table, coeffs, alpha, t0, eps);
        sweep.eps.push_back(eps);
        sweep.defect.push_back(d);
        sweep.ratio.push_back(d / std::pow(eps, 1.0 - beta));
    }
    if (!sweep.ratio.empty()) {
        sweep.max_ratio = *std::max_element(sweep.ratio.begin(), sweep.ratio.end());
        sweep.min_ratio = *std::min_element(sweep.ratio.begin(), sweep.ratio.end());
    }
    return sweep;
}

double max_operator_norm(const ResolventTable& table) {
    double worst = 0.0;
    for (double v : table.raw()) worst = std::max(worst, std::abs(v));
    return worst;
}

ExponentialBound fit_exponential_bound(const ResolventTable& table) {
    const TimeGrid& grid = table.grid();
    const int steps = grid.n_steps;
    // Growth rate from pairs separated by at least half the horizon, then the
    // smallest M >= 1 that makes the bound hold everywhere.
    const int min_gap = std::max(1, steps / 2);
    double rate = -std::numeric_limits<double>::infinity();
    for (int n = 1; n <= table.n_modes(); ++n)
        for (int i = 0; i + min_gap <= steps; ++i)
            for (int j = i + min_gap; j <= steps; ++j) {
                const double a = std::abs(table(n, j, i));
                if (a > 0.0) rate = std::max(rate, std::log(a) / (grid.node(j) - grid.node(i)));
            }
    if (!std::isfinite(rate)) rate = 0.0;
    ExponentialBound fit{1.0, rate};
    for (int n = 1; n <= table.n_modes(); ++n)
        for (int i = 0; i <= steps; ++i)
            for (int j = i; j <= steps; ++j) {
                const double a = std::abs(table(n, j, i));
                fit.M = std::max(fit.M, a * std::exp(-rate * (grid.node(j) - grid.node(i))));
            }
    return fit;
}

bool ExponentialBound::holds_on(const ResolventTable& table) const {
    const TimeGrid& grid = table.grid();
    for (int n = 1; n <= table.n_modes(); ++n)
        for (int i = 0; i <= grid.n_steps; ++i)
            for (int j = i; j <= grid.n_steps; ++j)
                if (std::abs(table(n, j, i)) > M * std::exp(beta * (grid.node(j) - grid.node(i))) * (1.0 + 1e-12))
                    return false;
    return true;
}

}  // namespace memctl
