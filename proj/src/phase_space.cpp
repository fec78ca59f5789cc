#include "memctl/phase_space.hpp"

#include "memctl/errors.hpp"

#include <algorithm>
#include <cmath>

namespace memctl {

HistorySegment::HistorySegment(std::vector<ModeVector> samples, double spacing, double gamma,
                               TailKind tail, double tail_rate)
    : samples_(std::move(samples)), spacing_(spacing), gamma_(gamma), tail_(tail), tail_rate_(tail_rate) {
    if (samples_.empty()) throw InputError("history: at least one sample is required");
    if (!(spacing_ > 0.0)) throw InputError("history: spacing must be positive");
    if (!(gamma_ > 0.0)) throw InputError("history: gamma must be positive");
    if (tail_ == TailKind::exponential && !(tail_rate_ >= 0.0))
        throw InputError("history: exponential tail rate must be >= 0");
    for (const auto& s : samples_) {
        if (s.size() != samples_.front().size()) throw InputError("history: inconsistent mode counts");
        if (!s.allFinite()) throw InputError("history: non-finite sample");
    }
}

HistorySegment HistorySegment::from_function(const std::function<ModeVector(double)>& psi, double span,
                                             int intervals, double gamma, TailKind tail, double tail_rate) {
    if (intervals < 1 || !(span > 0.0)) throw InputError("history: need span > 0 and intervals >= 1");
    std::vector<ModeVector> samples;
    samples.reserve(intervals + 1);
    const double dtheta = span / intervals;
    for (int k = 0; k <= intervals; ++k) samples.push_back(psi(-k * dtheta));
    return HistorySegment(std::move(samples), dtheta, gamma, tail, tail_rate);
}

ModeVector HistorySegment::at(double theta) const {
    if (theta > 0.0) throw InputError("history: theta must be <= 0");
    const double x = -theta / spacing_;
    const auto last = static_cast<double>(samples_.size() - 1);
    if (x <= last) {
        const auto k = static_cast<std::size_t>(std::floor(x));
        if (k + 1 >= samples_.size()) return samples_.back();
        const double w = x - static_cast<double>(k);
        if (w == 0.0) return samples_[k];
        return (1.0 - w) * samples_[k] + w * samples_[k + 1];
    }
    switch (tail_) {
        case TailKind::zero:
            return ModeVector::Zero(samples_.back().size());
        case TailKind::constant:
            return samples_.back();
        case TailKind::exponential:
            return samples_.back() * std::exp(tail_rate_ * (theta + span()));
    }
    return samples_.back();
}

HistorySegment HistorySegment::shifted(double t) const {
    if (t > 0.0) throw InputError("history: shift must be <= 0");
    std::vector<ModeVector> out;
    out.reserve(samples_.size());
    for (std::size_t k = 0; k < samples_.size(); ++k) out.push_back(at(t - static_cast<double>(k) * spacing_));
    return HistorySegment(std::move(out), spacing_, gamma_, tail_, tail_rate_);
}

DelayLaw DelayLaw::constant(double lag) {
    if (!(lag >= 0.0)) throw InputError("delay: constant lag must be >= 0");
    return DelayLaw{[lag](double) { return lag; }, lag};
}

DelayLaw DelayLaw::linear(double slope) {
    if (!(slope >= 0.0)) throw InputError("delay: slope must be >= 0");
    return DelayLaw{[slope](double s) { return slope * s; }, std::nullopt};
}

DelayLaw DelayLaw::quadratic(double a, double b) {
    if (!(a >= 0.0 && b >= 0.0)) throw InputError("delay: coefficients must be >= 0");
    return DelayLaw{[a, b](double s) { return a + b * s * s; }, std::nullopt};
}

ModeVector Trajectory::at(double t) const {
    if (t < 0.0 || t > grid.tau * (1.0 + 1e-12)) throw InputError("trajectory: time outside [0, tau]");
    const double x = std::min(t / grid.step(), static_cast<double>(grid.n_steps));
    const auto k = static_cast<std::size_t>(std::floor(x));
    if (k >= states.size() - 1) return states.back();
    const double w = x - static_cast<double>(k);
    if (w == 0.0) return states[k];
    return (1.0 - w) * states[k] + w * states[k + 1];
}

double weighted_norm(const HistorySegment& psi, bool fractional, double t0,
                     const CoefficientFunctions& coeffs) {
    auto norm_of = [&](const ModeVector& v) {
        return fractional ? fractional_power_apply(v, 0.5, t0, coeffs).norm() : v.norm();
    };
    const auto samples = psi.samples();
    double best = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const double theta = -static_cast<double>(k) * psi.spacing();
        best = std::max(best, std::exp(psi.gamma() * theta) * norm_of(samples[k]));
    }
    // Tail suprema: e^{gamma theta} is increasing and both nonzero tails are
    // nonincreasing in |theta|, so the tail supremum sits at theta = -span.
    const double edge = std::exp(-psi.gamma() * psi.span()) * norm_of(samples.back());
    switch (psi.tail()) {
        case TailKind::zero:
            break;
        case TailKind::constant:
        case TailKind::exponential:
            best = std::max(best, edge);
            break;
    }
    return best;
}

double weighted_norm(const HistorySegment& psi) {
    return weighted_norm(psi, false, 0.0, CoefficientFunctions{});
}

ModeVector state_at(const Trajectory& trajectory, const HistorySegment& phi, double time) {
    if (time < 0.0) return phi.at(time);
    return trajectory.at(time);
}

HistorySegment segment_extract(const Trajectory& trajectory, const HistorySegment& phi, double t) {
    const double tau = trajectory.grid.tau;
    if (t < 0.0 || t > tau * (1.0 + 1e-12)) throw InputError("segment_extract: t must lie in [0, tau]");
    if (t == 0.0) return phi;
    const double h = trajectory.grid.step();
    const int count = static_cast<int>(std::ceil((t + phi.span()) / h - 1e-9));
    std::vector<ModeVector> samples;
    samples.reserve(count + 1);
    for (int k = 0; k <= count; ++k) samples.push_back(state_at(trajectory, phi, t - k * h));
    return HistorySegment(std::move(samples), h, phi.gamma(), phi.tail(), phi.tail_rate());
}

double delay_evaluate(double t, const ModeVector& head, const DelayLaw& law) {
    return t - law(head.norm());
}

double delay_evaluate(double t, const HistorySegment& psi, const DelayLaw& law) {
    return delay_evaluate(t, psi.head(), law);
}

HistoryConstants history_bound_constants(const HistorySegment& phi, std::span<const double> rho_samples) {
    HistoryConstants out;
    const double phi_norm = weighted_norm(phi);
    if (phi_norm > 0.0)
        for (double t : rho_samples) {
            if (t > 0.0) throw InputError("history_bound_constants: delay samples must be <= 0");
            out.sup_theta = std::max(out.sup_theta, weighted_norm(phi.shifted(t)) / phi_norm);
        }
    // sup_{t in [0, tau]} e^{-gamma t} = 1, and K(t) = 1 for C_gamma.
    out.H2 = out.sup_theta + 1.0;
    out.H3 = 1.0;
    return out;
}

}  // namespace memctl
