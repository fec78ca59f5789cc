#pragma once

// Per-mode resolvent R(t, s) of
//   x'(t) = -A(t) x(t) + int_s^t G(t, r) x(r) dr,   R(s, s) = I,
// for the sine-diagonal heat-with-memory model. Mode n obeys the scalar Volterra
// integro-differential equation
//   r'(t) = (b(t) - n^2) r(t) - n^2 int_s^t C(t, r) r(r) dr,   r(s) = 1.

#include "memctl/spectral.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace memctl {

struct TimeGrid {
    double tau = 1.0;
    int n_steps = 200;

    static TimeGrid make(double tau, int n_steps);
    void validate() const;
    double step() const { return tau / n_steps; }
    double node(int j) const { return j == n_steps ? tau : j * step(); }
    /// Index of the node equal to t, or -1 when t is not a grid node (relative tolerance 1e-9).
    int index_of(double t) const;
};

/// Triangular per-mode storage v_n(t_j, t_i), 0 <= i <= j <= n_steps, n = 1..N.
class ModeTable {
public:
    ModeTable() = default;
    ModeTable(TimeGrid grid, int n_modes);

    int n_modes() const { return n_modes_; }
    const TimeGrid& grid() const { return grid_; }

    double operator()(int n, int j, int i) const { return data_[offset(n, i) + (j - i)]; }
    double& at(int n, int j, int i) { return data_[offset(n, i) + (j - i)]; }

    /// Samples j = i..n_steps for fixed (n, i).
    std::span<const double> column(int n, int i) const;
    std::span<double> column(int n, int i);

    /// Diagonal operator at (t_j, t_i) as its vector of mode factors.
    ModeVector slice(int j, int i) const;

    std::span<const double> raw() const { return data_; }

private:
    std::size_t offset(int n, int i) const {
        const std::size_t s = static_cast<std::size_t>(grid_.n_steps);
        const std::size_t ii = static_cast<std::size_t>(i);
        return static_cast<std::size_t>(n - 1) * per_mode_ + ii * (s + 1) - ii * (ii - (ii > 0 ? 1 : 0)) / 2;
    }

    TimeGrid grid_{};
    int n_modes_ = 0;
    std::size_t per_mode_ = 0;
    std::vector<double> data_;
};

using ResolventTable = ModeTable;

/// Coefficient functions sampled once on a grid.
struct SampledCoefficients {
    TimeGrid grid;
    std::vector<double> b_integral;  // int_0^{t_j} b(r) dr, per-interval Simpson
    std::vector<double> b_values;
    std::vector<double> kernel;      // C(t_j, t_k), k <= j, row-packed
    std::vector<double> kernel_ds;   // dC/ds(t_j, t_k), k <= j, row-packed

    static SampledCoefficients sample(const TimeGrid& grid, const CoefficientFunctions& coeffs);

    double c(int j, int k) const { return kernel[row(j) + k]; }
    double c_ds(int j, int k) const { return kernel_ds[row(j) + k]; }
    /// Memory-free evolution factor exp(-n^2 (t_j - t_i) + int_{t_i}^{t_j} b).
    double evolution(int n, int j, int i) const;

private:
    static std::size_t row(int j) { return static_cast<std::size_t>(j) * (j + 1) / 2; }
};

/// exp(-n^2 (t - s) + int_s^t b(r) dr), inner integral by composite Simpson.
double evolution_factor(int n, double s, double t, const CoefficientFunctions& coeffs,
                        int simpson_intervals = 64);

/// Samples r_n(t_j, t_{s_index}) for j = s_index..n_steps.
std::vector<double> solve_mode_resolvent(int n, int s_index, const TimeGrid& grid,
                                         const CoefficientFunctions& coeffs);

/// Column solve against pre-sampled coefficients; writes r_n(t_j, t_s) for j = s..n_steps into out.
void solve_mode_column(int n, int s_index, const SampledCoefficients& sampled, std::span<double> out);

/// All (mode, start) columns; OpenMP-parallel over independent columns.
ResolventTable build_resolvent_table(const TimeGrid& grid, const BasisSpec& basis,
                                     const CoefficientFunctions& coeffs);

/// Dense CSV dump: header line "N,n_steps,tau", then "n,i,j,value" rows.
void write_resolvent_csv(const ResolventTable& table, std::ostream& os);

// ---------------------------------------------------------------------------
// Structural checks

struct IdentityCheck {
    ModeTable kernel;  ///< Q(r, s) or P(r, s) mode factors
    double defect = 0.0;
};

/// Rebuilds Q(r, s) from R and returns max |R - U - int U Q|.
IdentityCheck q_kernel_reconstruct(const ResolventTable& table, const CoefficientFunctions& coeffs);

/// Builds P(r, s) from U and returns max |U - R - int R P|.
IdentityCheck p_kernel_inverse_check(const ResolventTable& table, const CoefficientFunctions& coeffs);

/// max over modes and grid pairs of |r_n(t_j, t_i) - evolution factor|.
double memory_free_defect(const ResolventTable& table, const CoefficientFunctions& coeffs);

/// sup_{s < t} (t - s)^beta max_n (n^2 - b(t))^beta |r_n(t, s)|, beta in (0, 1).
double fractional_bound_scan(const ResolventTable& table, const CoefficientFunctions& coeffs,
                             double beta);

/// max_{s <= t, t + eps <= tau} ||A^alpha(t0) [R(t + eps, s) - R(t + eps, t) R(t, s)]||.
/// eps must be a positive multiple of the grid step.
double cocycle_defect(const ResolventTable& table, const CoefficientFunctions& coeffs,
                      double alpha, double t0, double eps);

struct CocycleSweep {
    double alpha = 0.0;
    double beta = 0.0;
    std::vector<double> eps;
    std::vector<double> defect;
    std::vector<double> ratio;  ///< defect / eps^(1 - beta)
    double max_ratio = 0.0;
    double min_ratio = 0.0;
};

CocycleSweep cocycle_sweep(const ResolventTable& table, const CoefficientFunctions& coeffs,
                           double alpha, double beta, double t0, std::span<const double> eps_list);

/// |r_n(t, s)| <= M exp(beta (t - s)) on every sample, M >= 1.
struct ExponentialBound {
    double M = 1.0;
    double beta = 0.0;
    bool holds_on(const ResolventTable& table) const;
};

ExponentialBound fit_exponential_bound(const ResolventTable& table);

/// sup over stored samples of ||R(t_j, t_i)|| = max_n |r_n|.
double max_operator_norm(const ResolventTable& table);

namespace serial {
/// Single-threaded reference build used to validate the parallel kernel.
ResolventTable build_resolvent_table(const TimeGrid& grid, const BasisSpec& basis,
                                     const CoefficientFunctions& coeffs);
}  // namespace serial

}  // namespace memctl
