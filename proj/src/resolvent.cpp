#include "memctl/resolvent.hpp"

#include "memctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

namespace memctl {

TimeGrid TimeGrid::make(double tau, int n_steps) {
    TimeGrid g{tau, n_steps};
    g.validate();
    return g;
}

void TimeGrid::validate() const {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw InputError("grid: tau must be positive");
    if (n_steps < 1) throw InputError("grid: n_steps must be >= 1");
}

int TimeGrid::index_of(double t) const {
    const double x = t / step();
    const double r = std::round(x);
    if (std::abs(x - r) > 1e-9 * std::max(1.0, std::abs(x))) return -1;
    if (r < 0 || r > n_steps) return -1;
    return static_cast<int>(r);
}

ModeTable::ModeTable(TimeGrid grid, int n_modes)
    : grid_(grid),
      n_modes_(n_modes),
      per_mode_(static_cast<std::size_t>(grid.n_steps + 1) * (grid.n_steps + 2) / 2),
      data_(per_mode_ * static_cast<std::size_t>(n_modes), 0.0) {}

std::span<const double> ModeTable::column(int n, int i) const {
    return {data_.data() + offset(n, i), static_cast<std::size_t>(grid_.n_steps - i + 1)};
}

std::span<double> ModeTable::column(int n, int i) {
    return {data_.data() + offset(n, i), static_cast<std::size_t>(grid_.n_steps - i + 1)};
}

ModeVector ModeTable::slice(int j, int i) const {
    ModeVector v(n_modes_);
    for (int n = 1; n <= n_modes_; ++n) v[n - 1] = (*this)(n, j, i);
    return v;
}

SampledCoefficients SampledCoefficients::sample(const TimeGrid& grid,
                                                const CoefficientFunctions& coeffs) {
    grid.validate();
    SampledCoefficients s;
    s.grid = grid;
    const int steps = grid.n_steps;
    const double h = grid.step();
    s.b_values.resize(steps + 1);
    s.b_integral.assign(steps + 1, 0.0);
    for (int j = 0; j <= steps; ++j) s.b_values[j] = coeffs.b(grid.node(j));
    for (int j = 0; j < steps; ++j) {
        const double mid = coeffs.b(grid.node(j) + 0.5 * h);
        s.b_integral[j + 1] = s.b_integral[j] + h / 6.0 * (s.b_values[j] + 4.0 * mid + s.b_values[j + 1]);
    }
    const std::size_t total = static_cast<std::size_t>(steps + 1) * (steps + 2) / 2;
    s.kernel.resize(total);
    s.kernel_ds.resize(total);
    for (int j = 0; j <= steps; ++j)
        for (int k = 0; k <= j; ++k) {
            s.kernel[row(j) + k] = coeffs.kernel(grid.node(j), grid.node(k));
            s.kernel_ds[row(j) + k] = coeffs.kernel_ds(grid.node(j), grid.node(k));
        }
    return s;
}

double SampledCoefficients::evolution(int n, int j, int i) const {
    const double nn = static_cast<double>(n) * n;
    return std::exp(-nn * (grid.node(j) - grid.node(i)) + b_integral[j] - b_integral[i]);
}

double evolution_factor(int n, double s, double t, const CoefficientFunctions& coeffs,
                        int simpson_intervals) {
    if (t < s) throw InputError("evolution_factor: requires s <= t");
    if (t == s) return 1.0;
    const int m = simpson_intervals + (simpson_intervals % 2);
    const double h = (t - s) / m;
    double acc = coeffs.b(s) + coeffs.b(t);
    for (int k = 1; k < m; ++k) acc += (k % 2 ? 4.0 : 2.0) * coeffs.b(s + k * h);
    const double b_int = acc * h / 3.0;
    const double nn = static_cast<double>(n) * n;
    return std::exp(-nn * (t - s) + b_int);
}

void solve_mode_column(int n, int s_index, const SampledCoefficients& sampled, std::span<double> out) {
    const TimeGrid& grid = sampled.grid;
    const int steps = grid.n_steps;
    if (s_index < 0 || s_index > steps) throw InputError("solve_mode_resolvent: s_index out of range");
    if (static_cast<int>(out.size()) != steps - s_index + 1)
        throw InputError("solve_mode_resolvent: output span has wrong length");

    const double h = grid.step();
    const double nn = static_cast<double>(n) * n;
    auto r = [&](int j) -> double& { return out[j - s_index]; };
    r(s_index) = 1.0;

    // Integrating-factor trapezoid: the local term -n^2 + b(t) is integrated exactly
    // over each step, the memory term by the trapezoidal rule (implicit in its endpoint).
    double memory_j = 0.0;
    for (int j = s_index; j < steps; ++j) {
        const double e = std::exp(-nn * h + sampled.b_integral[j + 1] - sampled.b_integral[j]);
        // Memory integral at t_{j+1} without its r_{j+1} endpoint contribution.
        double known = 0.5 * sampled.c(j + 1, s_index) * r(s_index);
        for (int k = s_index + 1; k <= j; ++k) known += sampled.c(j + 1, k) * r(k);
        known *= -nn * h;
        const double diag = -nn * 0.5 * h * sampled.c(j + 1, j + 1);
        const double rhs = e * r(j) + 0.5 * h * (e * memory_j + known);
        const double next = rhs / (1.0 - 0.5 * h * diag);
        if (!std::isfinite(next) || std::abs(next) > 1e12)
            throw NumericalError("resolvent unstable: mode " + std::to_string(n) + ", start index " +
                                 std::to_string(s_index) + ", step " + std::to_string(j + 1));
        r(j + 1) = next;
        memory_j = known + diag * next;
    }
}

std::vector<double> solve_mode_resolvent(int n, int s_index, const TimeGrid& grid,
                                         const CoefficientFunctions& coeffs) {
    if (n < 1) throw InputError("solve_mode_resolvent: mode index must be >= 1");
    if (s_index < 0 || s_index > grid.n_steps)
        throw InputError("solve_mode_resolvent: s_index out of range");
    const auto sampled = SampledCoefficients::sample(grid, coeffs);
    std::vector<double> out(grid.n_steps - s_index + 1);
    solve_mode_column(n, s_index, sampled, out);
    return out;
}

namespace {

void check_build_inputs(const TimeGrid& grid, const BasisSpec& basis) {
    grid.validate();
    if (basis.n_modes < 1) throw InputError("build_resolvent_table: n_modes must be >= 1");
}

}  // namespace

ResolventTable build_resolvent_table(const TimeGrid& grid, const BasisSpec& basis,
                                     const CoefficientFunctions& coeffs) {
    check_build_inputs(grid, basis);
    const auto sampled = SampledCoefficients::sample(grid, coeffs);
    ResolventTable table(grid, basis.n_modes);
    const int steps = grid.n_steps;
    const long total = static_cast<long>(basis.n_modes) * (steps + 1);

    std::string failure;
#pragma omp parallel for schedule(dynamic, 4)
    for (long task = 0; task < total; ++task) {
        const int n = static_cast<int>(task / (steps + 1)) + 1;
        const int i = static_cast<int>(task % (steps + 1));
        try {
            solve_mode_column(n, i, sampled, table.column(n, i));
        } catch (const NumericalError& e) {
#pragma omp critical(memctl_resolvent_failure)
            if (failure.empty()) failure = e.what();
        }
    }
    if (!failure.empty()) throw NumericalError(failure);
    return table;
}

namespace serial {

ResolventTable build_resolvent_table(const TimeGrid& grid, const BasisSpec& basis,
                                     const CoefficientFunctions& coeffs) {
    check_build_inputs(grid, basis);
    const auto sampled = SampledCoefficients::sample(grid, coeffs);
    ResolventTable table(grid, basis.n_modes);
    for (int n = 1; n <= basis.n_modes; ++n)
        for (int i = 0; i <= grid.n_steps; ++i) solve_mode_column(n, i, sampled, table.column(n, i));
    return table;
}

}  // namespace serial

void write_resolvent_csv(const ResolventTable& table, std::ostream& os) {
    const auto& grid = table.grid();
    os << std::setprecision(17);
    os << "N,n_steps,tau\n" << table.n_modes() << ',' << grid.n_steps << ',' << grid.tau << '\n';
    os << "n,i,j,value\n";
    for (int n = 1; n <= table.n_modes(); ++n)
        for (int i = 0; i <= grid.n_steps; ++i)
            for (int j = i; j <= grid.n_steps; ++j) os << n << ',' << i << ',' << j << ',' << table(n, j, i) << '\n';
}

}  // namespace memctl
