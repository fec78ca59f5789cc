#pragma once

// Histories in the exponentially weighted space C_gamma:
//   ||psi|| = sup_{theta <= 0} e^{gamma theta} ||psi(theta)||,
// stored on a uniform grid over [-span, 0] plus a closed-form tail model.

#include "memctl/resolvent.hpp"
#include "memctl/spectral.hpp"

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace memctl {

enum class TailKind { zero, constant, exponential };

class HistorySegment {
public:
    HistorySegment() = default;
    /// samples[k] = psi(-k * spacing), k = 0..K. tail_rate >= 0 applies to TailKind::exponential.
    HistorySegment(std::vector<ModeVector> samples, double spacing, double gamma,
                   TailKind tail = TailKind::constant, double tail_rate = 0.0);

    static HistorySegment from_function(const std::function<ModeVector(double)>& psi, double span,
                                        int intervals, double gamma, TailKind tail = TailKind::constant,
                                        double tail_rate = 0.0);

    /// psi(theta) for theta <= 0; linear interpolation on the grid, tail model beyond it.
    ModeVector at(double theta) const;
    const ModeVector& head() const { return samples_.front(); }

    double span() const { return spacing_ * static_cast<double>(samples_.size() - 1); }
    double spacing() const { return spacing_; }
    double gamma() const { return gamma_; }
    TailKind tail() const { return tail_; }
    double tail_rate() const { return tail_rate_; }
    int n_modes() const { return samples_.empty() ? 0 : static_cast<int>(samples_.front().size()); }
    std::span<const ModeVector> samples() const { return samples_; }

    /// phi_t(theta) = phi(t + theta) for t <= 0, on the same grid spacing.
    HistorySegment shifted(double t) const;

private:
    std::vector<ModeVector> samples_;
    double spacing_ = 1.0;
    double gamma_ = 1.0;
    TailKind tail_ = TailKind::constant;
    double tail_rate_ = 0.0;
};

/// State-dependent lag sigma(||psi(0)||) >= 0.
struct DelayLaw {
    std::function<double(double)> sigma;
    std::optional<double> constant_lag;

    double operator()(double s) const { return sigma(s); }

    static DelayLaw constant(double lag);
    /// sigma(s) = slope * s
    static DelayLaw linear(double slope);
    /// sigma(s) = a + b s^2
    static DelayLaw quadratic(double a, double b);
};

/// States on the time grid of [0, tau].
struct Trajectory {
    TimeGrid grid;
    std::vector<ModeVector> states;

    /// x(t) for t in [0, tau], linear interpolation between nodes.
    ModeVector at(double t) const;
};

/// sup_{theta <= 0} e^{gamma theta} ||psi(theta)||, or with A^{1/2}(t0) applied when fractional is set.
double weighted_norm(const HistorySegment& psi, bool fractional, double t0,
                     const CoefficientFunctions& coeffs);
double weighted_norm(const HistorySegment& psi);

/// x(time) of the trajectory extended by the history phi for negative times.
ModeVector state_at(const Trajectory& trajectory, const HistorySegment& phi, double time);

/// The segment x_t(theta) = x(t + theta).
HistorySegment segment_extract(const Trajectory& trajectory, const HistorySegment& phi, double t);

/// rho(t, psi) = t - sigma(||psi(0)||).
double delay_evaluate(double t, const HistorySegment& psi, const DelayLaw& law);
double delay_evaluate(double t, const ModeVector& head, const DelayLaw& law);

struct HistoryConstants {
    double H2 = 1.0;
    double H3 = 1.0;
    double sup_theta = 0.0;  ///< sup of ||phi_t|| / ||phi|| over the negative delay samples
};

/// Constants of the segment bound ||x_s|| <= H2 ||phi|| + H3 sup ||x|| for C_gamma,
/// where K(t) = 1 and M(t) = e^{-gamma t}.
HistoryConstants history_bound_constants(const HistorySegment& phi, std::span<const double> rho_samples);

}  // namespace memctl
