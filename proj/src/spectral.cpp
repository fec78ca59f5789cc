#include "memctl/spectral.hpp"

#include "memctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace memctl {

namespace {
constexpr double kPi = std::numbers::pi;
const double kNormalization = std::sqrt(2.0 / kPi);
}  // namespace

void BasisSpec::validate() const {
    if (n_modes < 1) throw InputError("basis: n_modes must be >= 1");
    if (collocation_points < 2 * n_modes)
        throw InputError("basis: collocation_points must be >= 2 * n_modes (got " +
                         std::to_string(collocation_points) + " for " +
                         std::to_string(n_modes) + " modes)");
}

BasisSpec BasisSpec::with_modes(int n_modes) {
    BasisSpec spec{n_modes, std::max(4 * n_modes, 16)};
    spec.validate();
    return spec;
}

CoefficientFunctions CoefficientFunctions::smooth(double b0, double b1, double c0, double decay) {
    CoefficientFunctions c;
    c.b = [b0, b1](double t) { return b0 + b1 * std::sin(t); };
    c.kernel = [c0, decay](double t, double s) { return c0 * std::exp(-decay * (t - s)); };
    c.kernel_ds = [c0, decay](double t, double s) {
        return decay * c0 * std::exp(-decay * (t - s));
    };
    c.kernel_dt_bound = std::abs(decay * c0);
    return c;
}

CoefficientFunctions CoefficientFunctions::constant(double b0, double c0) {
    CoefficientFunctions c;
    c.b = [b0](double) { return b0; };
    c.kernel = [c0](double, double) { return c0; };
    c.kernel_ds = [](double, double) { return 0.0; };
    c.kernel_dt_bound = 0.0;
    return c;
}

CoefficientFunctions CoefficientFunctions::heat_default() { return smooth(-2.0, -0.1, 0.5, 1.0); }

void CoefficientFunctions::validate(double tau, int samples) const {
    if (!b || !kernel || !kernel_ds) throw InputError("coefficients: b, kernel and kernel_ds must be set");
    for (int i = 0; i <= samples; ++i) {
        const double t = tau * i / samples;
        const double bt = b(t);
        if (!std::isfinite(bt) || bt >= -1.0)
            throw InputError("coefficients: b(t) < -1 violated at t = " + std::to_string(t) +
                             " (b = " + std::to_string(bt) + ")");
        for (int j = 0; j <= i; j += std::max(1, samples / 16)) {
            const double s = tau * j / samples;
            if (!std::isfinite(kernel(t, s)) || !std::isfinite(kernel_ds(t, s)))
                throw InputError("coefficients: non-finite kernel value");
        }
    }
}

std::vector<double> collocation_nodes(const BasisSpec& basis) {
    std::vector<double> nodes(basis.collocation_points + 1);
    for (int j = 0; j <= basis.collocation_points; ++j)
        nodes[j] = kPi * j / basis.collocation_points;
    return nodes;
}

std::vector<double> simpson_weights(int intervals, double length) {
    if (intervals < 2) throw InputError("simpson_weights: need at least 2 intervals");
    const double h = length / intervals;
    std::vector<double> w(intervals + 1, 0.0);
    // Odd interval counts close with Simpson's 3/8 rule on the last three intervals.
    const int even_part = (intervals % 2 == 0) ? intervals : intervals - 3;
    for (int k = 0; k + 2 <= even_part; k += 2) {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
    }
    if (even_part != intervals) {
        const int k = even_part;
        w[k] += 3.0 * h / 8.0;
        w[k + 1] += 9.0 * h / 8.0;
        w[k + 2] += 9.0 * h / 8.0;
        w[k + 3] += 3.0 * h / 8.0;
    }
    return w;
}

ModeVector project_samples(std::span<const double> values, const BasisSpec& basis) {
    basis.validate();
    const int m = basis.collocation_points;
    if (static_cast<int>(values.size()) != m + 1)
        throw InputError("project: expected " + std::to_string(m + 1) + " samples");
    for (double v : values)
        if (!std::isfinite(v)) throw InputError("project: non-finite function value");
    const auto w = simpson_weights(m, kPi);
    ModeVector c = ModeVector::Zero(basis.n_modes);
    for (int j = 0; j <= m; ++j) {
        if (values[j] == 0.0) continue;
        const double xi = kPi * j / m;
        const double wf = w[j] * values[j] * kNormalization;
        for (int n = 1; n <= basis.n_modes; ++n) c[n - 1] += wf * std::sin(n * xi);
    }
    return c;
}

ModeVector project(const std::function<double(double)>& f, const BasisSpec& basis) {
    basis.validate();
    const auto nodes = collocation_nodes(basis);
    std::vector<double> values(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) values[j] = f(nodes[j]);
    return project_samples(values, basis);
}

std::vector<double> synthesize(const ModeVector& coeffs, const BasisSpec& basis) {
    const auto nodes = collocation_nodes(basis);
    std::vector<double> out(nodes.size(), 0.0);
    for (std::size_t j = 0; j < nodes.size(); ++j) out[j] = evaluate_at(coeffs, nodes[j]);
    return out;
}

std::vector<double> synthesize_derivative(const ModeVector& coeffs, const BasisSpec& basis) {
    const auto nodes = collocation_nodes(basis);
    std::vector<double> out(nodes.size(), 0.0);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        double acc = 0.0;
        for (Eigen::Index n = 1; n <= coeffs.size(); ++n)
            acc += coeffs[n - 1] * static_cast<double>(n) * std::cos(static_cast<double>(n) * nodes[j]);
        out[j] = kNormalization * acc;
    }
    return out;
}

CollocationTransform::CollocationTransform(const BasisSpec& basis) : basis_(basis) {
    basis_.validate();
    const int m = basis_.collocation_points;
    const int n_modes = basis_.n_modes;
    sine_.resize(m + 1, n_modes);
    cosine_.resize(m + 1, n_modes);
    for (int j = 0; j <= m; ++j) {
        const double xi = kPi * j / m;
        for (int n = 1; n <= n_modes; ++n) {
            sine_(j, n - 1) = kNormalization * std::sin(n * xi);
            cosine_(j, n - 1) = kNormalization * n * std::cos(n * xi);
        }
    }
    const auto w = simpson_weights(m, kPi);
    weights_ = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
}

std::vector<double> CollocationTransform::values(const ModeVector& coeffs) const {
    const Eigen::VectorXd v = sine_ * coeffs;
    return {v.data(), v.data() + v.size()};
}

std::vector<double> CollocationTransform::derivative(const ModeVector& coeffs) const {
    const Eigen::VectorXd v = cosine_ * coeffs;
    return {v.data(), v.data() + v.size()};
}

ModeVector CollocationTransform::project(std::span<const double> values) const {
    if (static_cast<Eigen::Index>(values.size()) != weights_.size())
        throw InputError("project: sample count does not match the collocation grid");
    for (double v : values)
        if (!std::isfinite(v)) throw InputError("project: non-finite function value");
    const Eigen::Map<const Eigen::VectorXd> f(values.data(), static_cast<Eigen::Index>(values.size()));
    return sine_.transpose() * f.cwiseProduct(weights_);
}

double evaluate_at(const ModeVector& coeffs, double xi) {
    double acc = 0.0;
    for (Eigen::Index n = 1; n <= coeffs.size(); ++n)
        acc += coeffs[n - 1] * std::sin(static_cast<double>(n) * xi);
    return kNormalization * acc;
}

double mode_eigenvalue(int n, double t0, const CoefficientFunctions& coeffs) {
    return static_cast<double>(n) * n - coeffs.b(t0);
}

ModeVector fractional_power_apply(const ModeVector& x, double alpha, double t0,
                                  const CoefficientFunctions& coeffs) {
    if (!(alpha > -1.0 && alpha <= 1.0) || alpha == 0.0)
        throw InputError("fractional_power_apply: alpha must lie in (-1, 1] \\ {0}");
    ModeVector out(x.size());
    for (Eigen::Index n = 1; n <= x.size(); ++n) {
        const double lam = mode_eigenvalue(static_cast<int>(n), t0, coeffs);
        if (!(lam > 0.0)) throw InputError("fractional_power_apply: n^2 - b(t0) must be positive");
        out[n - 1] = std::pow(lam, alpha) * x[n - 1];
    }
    return out;
}

Eigen::MatrixXd control_matrix(double a1, double a2, int n_modes) {
    if (!(a1 >= 0.0 && a2 <= kPi)) throw InputError("control_matrix: need 0 <= a1 < a2 <= pi");
    if (!(a1 < a2)) throw InputError("control_matrix: a1 must be < a2");
    if (n_modes < 1) throw InputError("control_matrix: n_modes must be >= 1");
    // (2/pi) sin(m x) sin(n x) = (1/pi) [cos((m-n)x) - cos((m+n)x)]
    auto cos_integral = [a1, a2](int k) {
        if (k == 0) return a2 - a1;
        return (std::sin(k * a2) - std::sin(k * a1)) / k;
    };
    Eigen::MatrixXd b(n_modes, n_modes);
    for (int m = 1; m <= n_modes; ++m)
        for (int n = m; n <= n_modes; ++n) {
            const double v = (cos_integral(m - n) - cos_integral(m + n)) / kPi;
            b(m - 1, n - 1) = v;
            b(n - 1, m - 1) = v;
        }
    return b;
}

double fractional_ratio_bound(double alpha, double beta, double tau, int n_modes,
                              const CoefficientFunctions& coeffs, int samples) {
    double best = 0.0;
    for (int i = 0; i <= samples; ++i) {
        const double t = tau * i / samples;
        for (int k = 0; k <= samples; ++k) {
            const double s = tau * k / samples;
            for (int n = 1; n <= n_modes; ++n) {
                const double v = std::pow(mode_eigenvalue(n, t, coeffs), alpha) /
                                 std::pow(mode_eigenvalue(n, s, coeffs), beta);
                best = std::max(best, v);
            }
        }
    }
    return best;
}

}  // namespace memctl
