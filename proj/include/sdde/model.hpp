#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "sdde/errors.hpp"

namespace sdde {

/// Coefficient callable: value at (t, x, y) where x is the current state
/// and y the delayed state.
using CoeffFn = std::function<double(double, double, double)>;

/// Initial segment callable on [-delay, 0].
using SegmentFn = std::function<double(double)>;

/// Scalar delay equation
///   dx(t) = f(t, x(t), x(t-tau)) dt + g(t, x(t), x(t-tau)) dB(t)
/// with continuous initial segment xi on [-tau, 0].
///
/// The diffusion partials g1 = dg/dx and g2 = dg/dy are required by the
/// Milstein correction terms. Drift partials are optional; when present
/// they speed up the implicit solve and enable derivative probes without
/// finite differencing.
struct ProblemSpec {
    CoeffFn drift;
    CoeffFn diffusion;
    CoeffFn diffusion_dx;  // g1
    CoeffFn diffusion_dy;  // g2
    CoeffFn drift_dx;      // optional
    CoeffFn drift_dy;      // optional
    double delay = 0.0;
    double horizon = 0.0;
    SegmentFn initial_segment;
    double growth_beta = 0.0;

    void validate() const {
        if (!(delay > 0.0)) throw config_error("ProblemSpec: delay must be positive");
        if (!(horizon > delay))
            throw config_error("ProblemSpec: horizon must exceed the delay");
        if (!drift || !diffusion || !diffusion_dx || !diffusion_dy)
            throw config_error("ProblemSpec: drift, diffusion and diffusion partials are required");
        if (!initial_segment) throw config_error("ProblemSpec: initial segment is required");
        if (!(growth_beta >= 0.0)) throw config_error("ProblemSpec: growth_beta must be >= 0");
        // Dense sample of the initial segment; catches segments that are
        // undefined or non-finite somewhere on [-delay, 0].
        const int n = 1000;
        for (int i = 0; i <= n; ++i) {
            const double t = -delay + delay * static_cast<double>(i) / n;
            const double v = initial_segment(t);
            if (!std::isfinite(v))
                throw config_error("ProblemSpec: initial segment non-finite at t=" +
                                   std::to_string(t));
        }
    }
};

/// Central finite-difference partial of a coefficient, step
/// h = max(1e-6, 1e-6*|u|) in the differenced argument. Approximate;
/// use only where analytic partials are unavailable.
inline CoeffFn finite_difference_partial(CoeffFn fn, int arg_index) {
    if (arg_index != 1 && arg_index != 2)
        throw config_error("finite_difference_partial: arg_index must be 1 (x) or 2 (y)");
    return [fn = std::move(fn), arg_index](double t, double x, double y) {
        const double u = (arg_index == 1) ? x : y;
        const double h = std::max(1e-6, 1e-6 * std::abs(u));
        if (arg_index == 1) return (fn(t, x + h, y) - fn(t, x - h, y)) / (2.0 * h);
        return (fn(t, x, y + h) - fn(t, x, y - h)) / (2.0 * h);
    };
}

/// Truncation policy: Lambda dominates the coefficient sup on balls,
/// alpha(dt) sets the coefficient bound per step size, and the truncation
/// radius is Lambda^{-1}(alpha(dt)).
struct TruncationPolicy {
    std::function<double(double)> lambda;      // on [1, inf), strictly increasing
    std::function<double(double)> lambda_inv;  // on [Lambda(1), inf)
    std::function<double(double)> alpha;       // on (0, 1], strictly decreasing
    double k0 = 1.0;
    /// When set, truncation_radius returns this value unconditionally
    /// (+inf disables truncation entirely; used for divergence contrast
    /// experiments).
    std::optional<double> radius_override;

    /// Checks the policy constraints on the step sizes actually in use:
    /// dt^{1/4} * alpha(dt) <= k0, alpha strictly decreasing along the
    /// sorted dts, and Lambda(Lambda^{-1}(alpha(dt))) = alpha(dt) to
    /// 1e-10 relative on the unclamped branch.
    void validate_for(std::span<const double> dts) const;
};

/// Truncation radius r(dt) = Lambda^{-1}(alpha(dt)).
///
/// When alpha(dt) < Lambda(1) the inverse is undefined (its domain is
/// [Lambda(1), inf)); the radius clamps to 1 so that r >= 1 always holds
/// and states of magnitude <= 1 are never distorted.
inline double truncation_radius(const TruncationPolicy& policy, double dt) {
    if (policy.radius_override) {
        const double r = *policy.radius_override;
        if (!(r >= 1.0)) throw config_error("radius_override must be >= 1");
        return r;
    }
    if (!(dt > 0.0 && dt <= 1.0))
        throw config_error("truncation_radius: dt must lie in (0, 1]");
    const double a = policy.alpha(dt);
    if (!std::isfinite(a))
        throw eval_error("truncation policy: alpha(" + std::to_string(dt) + ") is not finite");
    const double lambda1 = policy.lambda(1.0);
    if (!std::isfinite(lambda1))
        throw eval_error("truncation policy: Lambda(1) is not finite");
    if (a < lambda1) return 1.0;
    const double r = policy.lambda_inv(a);
    if (!std::isfinite(r))
        throw eval_error("truncation policy: Lambda^{-1}(" + std::to_string(a) +
                         ") is not finite");
    return std::max(r, 1.0);
}

/// Radial clamp onto [-radius, radius]; maps 0 to 0.
inline double truncate(double chi, double radius) {
    return std::copysign(std::min(std::abs(chi), radius), chi);
}

/// The four truncated coefficients evaluated at one point.
struct TruncatedCoeffs {
    double f;
    double g;
    double g1;
    double g2;
    bool args_clamped;  // true if |x| or |y| exceeded the radius
};

/// f_dt, g_dt, g1_dt, g2_dt at (t, x, y): the raw coefficients evaluated
/// at the truncated arguments.
inline TruncatedCoeffs truncated_coeffs(const ProblemSpec& spec, double radius,
                                        double t, double x, double y) {
    const double px = truncate(x, radius);
    const double py = truncate(y, radius);
    TruncatedCoeffs out;
    out.f = spec.drift(t, px, py);
    out.g = spec.diffusion(t, px, py);
    out.g1 = spec.diffusion_dx(t, px, py);
    out.g2 = spec.diffusion_dy(t, px, py);
    out.args_clamped = std::abs(x) > radius || std::abs(y) > radius;
    const auto check = [&](double v, const char* which) {
        if (!std::isfinite(v))
            throw eval_error(std::string(which) + " returned a non-finite value at (t=" +
                             std::to_string(t) + ", x=" + std::to_string(px) +
                             ", y=" + std::to_string(py) + ")");
    };
    check(out.f, "drift");
    check(out.g, "diffusion");
    check(out.g1, "diffusion_dx");
    check(out.g2, "diffusion_dy");
    return out;
}

inline void TruncationPolicy::validate_for(std::span<const double> dts) const {
    if (radius_override) return;
    if (!lambda || !lambda_inv || !alpha)
        throw config_error("TruncationPolicy: lambda, lambda_inv and alpha are required");
    if (!(k0 >= 1.0) || !(k0 >= lambda(1.0)))
        throw config_error("TruncationPolicy: K0 must be >= max(1, Lambda(1))");
    double prev_dt = 0.0;
    double prev_alpha = 0.0;
    bool have_prev = false;
    for (double dt : dts) {
        if (!(dt > 0.0 && dt <= 1.0))
            throw config_error("TruncationPolicy: step size outside (0, 1]");
        const double a = alpha(dt);
        if (!std::isfinite(a) || !(a > 0.0))
            throw eval_error("TruncationPolicy: alpha not finite and positive at dt=" +
                             std::to_string(dt));
        if (std::pow(dt, 0.25) * a > k0 * (1.0 + 1e-12))
            throw config_error("TruncationPolicy: dt^{1/4} * alpha(dt) exceeds K0 at dt=" +
                               std::to_string(dt));
        if (have_prev) {
            // dts sorted either way; alpha must be strictly monotone against dt.
            if (dt != prev_dt && (dt < prev_dt) != (a > prev_alpha))
                throw config_error("TruncationPolicy: alpha is not strictly decreasing");
        }
        if (a >= lambda(1.0)) {
            const double r = lambda_inv(a);
            const double back = lambda(r);
            if (!(std::abs(back - a) <= 1e-10 * std::max(1.0, std::abs(a))))
                throw config_error(
                    "TruncationPolicy: Lambda(Lambda^{-1}(u)) != u beyond 1e-10 at dt=" +
                    std::to_string(dt));
        }
        prev_dt = dt;
        prev_alpha = a;
        have_prev = true;
    }
}

/// Uniform grid with dt = delay/M = horizon/M'. Index k runs over
/// [-M, M']; times are k*dt, exact for the dyadic step sizes this
/// library is used with.
class TimeGrid {
public:
    TimeGrid(double delay, double horizon, double dt) : dt_(dt) {
        if (!(dt > 0.0)) throw config_error("TimeGrid: dt must be positive");
        m_delay_ = static_cast<std::int64_t>(std::llround(delay / dt));
        m_total_ = static_cast<std::int64_t>(std::llround(horizon / dt));
        if (m_delay_ < 1 || static_cast<double>(m_delay_) * dt != delay)
            throw config_error("TimeGrid: dt does not divide the delay exactly");
        if (m_total_ < 1 || static_cast<double>(m_total_) * dt != horizon)
            throw config_error("TimeGrid: dt does not divide the horizon exactly");
        if (!(m_delay_ < m_total_))
            throw config_error("TimeGrid: need M < M' (horizon > delay)");
    }

    double dt() const noexcept { return dt_; }
    std::int64_t m_delay() const noexcept { return m_delay_; }
    std::int64_t m_total() const noexcept { return m_total_; }
    /// Number of grid values, k = -M .. M'.
    std::int64_t num_values() const noexcept { return m_total_ + m_delay_ + 1; }
    double time_of(std::int64_t k) const noexcept { return static_cast<double>(k) * dt_; }

private:
    double dt_;
    std::int64_t m_delay_;
    std::int64_t m_total_;
};

}  // namespace sdde
