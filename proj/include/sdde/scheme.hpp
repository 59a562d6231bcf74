#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sdde/errors.hpp"
#include "sdde/model.hpp"
#include "sdde/noise.hpp"

namespace sdde {

/// Stepper parameters. theta weights the implicit drift share; the
/// analysis covers theta in (0, 1] and requires K1 * theta * dt < 1
/// (dt < dt* = 1 and 1/(K1 theta)); theta = 0 is the explicit degenerate
/// case and is accepted but lies outside the convergence theorems.
struct SchemeConfig {
    double theta = 0.5;
    double k1_bound = 1.0;
    double newton_tol_abs = 1e-12;
    double newton_tol_rel = 1e-12;
    int newton_max_iter = 50;

    void validate(double dt) const {
        if (!(theta >= 0.0 && theta <= 1.0))
            throw config_error("SchemeConfig: theta must lie in [0, 1]");
        if (theta > 0.0 && !(k1_bound * theta * dt < 1.0))
            throw config_error("SchemeConfig: K1 * theta * dt = " +
                               std::to_string(k1_bound * theta * dt) +
                               " >= 1; reduce dt below dt* = min(1, 1/(K1*theta))");
        if (!(newton_tol_abs > 0.0) || !(newton_tol_rel >= 0.0) || newton_max_iter < 1)
            throw config_error("SchemeConfig: bad solver tolerances");
    }
};

/// Discrete trajectory on a TimeGrid; values at k = -M .. M', the
/// initial segment filled from xi exactly. Diagnostics are per interior
/// step k = 0 .. M'-1.
struct Trajectory {
    TimeGrid grid;
    std::vector<double> values;
    std::vector<std::int32_t> newton_iters;
    std::vector<std::uint8_t> truncated;

    explicit Trajectory(const TimeGrid& g)
        : grid(g),
          values(static_cast<std::size_t>(g.num_values()), 0.0),
          newton_iters(static_cast<std::size_t>(g.m_total()), 0),
          truncated(static_cast<std::size_t>(g.m_total()), 0) {}

    double value_at(std::int64_t k) const {
        return values[static_cast<std::size_t>(k + grid.m_delay())];
    }
    double& value_at(std::int64_t k) {
        return values[static_cast<std::size_t>(k + grid.m_delay())];
    }
    double terminal() const { return values.back(); }
};

struct ImplicitResult {
    double y;
    int iterations;
};

namespace detail {

inline double drift_trunc(const ProblemSpec& spec, double radius, double t, double x,
                          double y) {
    return spec.drift(t, truncate(x, radius), truncate(y, radius));
}

// d/dy of f(t, pi(y), pi(y_delay)): the clamp has zero slope outside the
// radius, so the derivative vanishes there and the bisection fallback
// takes over near the boundary.
inline double drift_trunc_dx(const ProblemSpec& spec, double radius, double t, double y,
                             double y_delay) {
    if (std::abs(y) > radius) return 0.0;
    if (spec.drift_dx)
        return spec.drift_dx(t, truncate(y, radius), truncate(y_delay, radius));
    const double h = std::max(1e-6, 1e-6 * std::abs(y));
    return (drift_trunc(spec, radius, t, y + h, y_delay) -
            drift_trunc(spec, radius, t, y - h, y_delay)) / (2.0 * h);
}

}  // namespace detail

/// Solves y - theta*dt*f_dt(t_next, y, y_delay_next) = c for y.
///
/// G is strictly increasing when K1*theta*dt < 1 (monotone-operator
/// existence), so a sign-changing bracket always exists. Damped Newton
/// first, then bisection on a bracket expanded geometrically around c.
inline ImplicitResult implicit_solve(const ProblemSpec& spec, double radius, double t_next,
                                     double y_delay_next, double dt, double c,
                                     const SchemeConfig& cfg) {
    if (!std::isfinite(c)) throw solver_error("implicit step: right-hand side not finite", c);
    if (cfg.theta == 0.0) return {c, 0};

    const double th_dt = cfg.theta * dt;
    const auto G = [&](double y) {
        return y - th_dt * detail::drift_trunc(spec, radius, t_next, y, y_delay_next) - c;
    };
    const auto tol = [&](double y) {
        return cfg.newton_tol_abs + cfg.newton_tol_rel * std::abs(y);
    };

    double y = c;
    double r = G(y);
    int iters = 0;
    while (iters < cfg.newton_max_iter) {
        if (std::abs(r) <= tol(y)) return {y, iters};
        const double slope = 1.0 - th_dt * detail::drift_trunc_dx(spec, radius, t_next, y,
                                                                  y_delay_next);
        if (!(slope > 1e-14) || !std::isfinite(slope)) break;
        double step = r / slope;
        double y_new = y - step;
        double r_new = G(y_new);
        // Step halving when the residual fails to decrease.
        int halvings = 0;
        while (std::isfinite(r_new) && std::abs(r_new) > std::abs(r) && halvings < 8) {
            step *= 0.5;
            y_new = y - step;
            r_new = G(y_new);
            ++halvings;
        }
        if (!std::isfinite(r_new)) break;
        y = y_new;
        r = r_new;
        ++iters;
    }
    if (std::abs(r) <= tol(y)) return {y, iters};

    // Bisection fallback: expand [c - w, c + w] until G changes sign.
    double w = 1.0;
    double lo = c - w, hi = c + w;
    double glo = G(lo), ghi = G(hi);
    int expansions = 0;
    while (!(glo <= 0.0 && ghi >= 0.0)) {
        w *= 2.0;
        if (!std::isfinite(w) || ++expansions > 200)
            throw solver_error("implicit step: no sign-changing bracket found (check K1 and dt)",
                               r);
        lo = c - w;
        hi = c + w;
        glo = G(lo);
        ghi = G(hi);
    }
    for (int i = 0; i < 400; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double gm = G(mid);
        ++iters;
        if (std::abs(gm) <= tol(mid)) return {mid, iters};
        if (gm < 0.0) lo = mid; else hi = mid;
        if (hi - lo <= 1e-18 * std::max(1.0, std::abs(mid))) {
            if (std::abs(gm) <= 10.0 * tol(mid)) return {mid, iters};
            throw solver_error("implicit step: bisection stalled with residual " +
                               std::to_string(gm), gm);
        }
    }
    throw solver_error("implicit step: failed to converge", G(0.5 * (lo + hi)));
}

enum class SchemeKind { ThetaMilstein, TruncatedEM };

namespace detail {

inline double step_impl(const ProblemSpec& spec, double radius, const TimeGrid& grid,
                        const SchemeConfig& cfg, const BrownianStore& store, std::int64_t k,
                        Trajectory& hist, SchemeKind kind) {
    const double dt = grid.dt();
    const std::int64_t m = grid.m_delay();
    const double t_k = grid.time_of(k);
    const double y_k = hist.value_at(k);
    const double y_km = hist.value_at(k - m);

    const TruncatedCoeffs co = truncated_coeffs(spec, radius, t_k, y_k, y_km);
    const double db = store.coarse_increment(dt, k);

    double c = y_k + (1.0 - cfg.theta) * dt * co.f + co.g * db;
    bool clamped = co.args_clamped;

    if (kind == SchemeKind::ThetaMilstein) {
        c += co.g1 * co.g * q1(db, dt);
        if (k >= m) {
            // Delayed cross term: g2 at the current point times g one delay
            // interval back, weighted by the iterated integral Q2.
            const double y_k2m = hist.value_at(k - 2 * m);
            const double g_delayed = spec.diffusion(grid.time_of(k - m), truncate(y_km, radius),
                                                    truncate(y_k2m, radius));
            if (!std::isfinite(g_delayed))
                throw eval_error("diffusion returned a non-finite value at the delayed point, "
                                 "step " + std::to_string(k));
            c += co.g2 * g_delayed * store.q2(dt, k, m);
            clamped = clamped || std::abs(y_k2m) > radius;
        }
    }

    if (!std::isfinite(c))
        throw solver_error("non-finite state update at step " + std::to_string(k), c);

    const double y_delay_next = hist.value_at(k + 1 - m);
    const ImplicitResult res =
        implicit_solve(spec, radius, grid.time_of(k + 1), y_delay_next, dt, c, cfg);
    if (!std::isfinite(res.y))
        throw solver_error("non-finite state at step " + std::to_string(k), res.y);

    clamped = clamped || std::abs(y_delay_next) > radius || std::abs(res.y) > radius;
    hist.newton_iters[static_cast<std::size_t>(k)] = res.iterations;
    hist.truncated[static_cast<std::size_t>(k)] = clamped ? 1 : 0;
    return res.y;
}

inline Trajectory simulate_impl(const ProblemSpec& spec, const TruncationPolicy& policy,
                                const TimeGrid& grid, const SchemeConfig& cfg,
                                const BrownianStore& store, SchemeKind kind) {
    cfg.validate(grid.dt());
    const double radius = truncation_radius(policy, grid.dt());
    Trajectory traj(grid);
    for (std::int64_t k = -grid.m_delay(); k <= 0; ++k) {
        const double v = spec.initial_segment(grid.time_of(k));
        if (!std::isfinite(v))
            throw eval_error("initial segment non-finite at t=" + std::to_string(grid.time_of(k)));
        traj.value_at(k) = v;
    }
    for (std::int64_t k = 0; k < grid.m_total(); ++k)
        traj.value_at(k + 1) = step_impl(spec, radius, grid, cfg, store, k, traj, kind);
    return traj;
}

}  // namespace detail

/// One step of the truncated theta-Milstein recursion: from history up
/// to t_k, returns Y(t_{k+1}). The Q2 branch is active only for k >= M.
inline double step(const ProblemSpec& spec, double radius, const TimeGrid& grid,
                   const SchemeConfig& cfg, const BrownianStore& store, std::int64_t k,
                   Trajectory& history) {
    return detail::step_impl(spec, radius, grid, cfg, store, k, history,
                             SchemeKind::ThetaMilstein);
}

/// Full truncated theta-Milstein trajectory on the grid.
inline Trajectory simulate(const ProblemSpec& spec, const TruncationPolicy& policy,
                           const TimeGrid& grid, const SchemeConfig& cfg,
                           const BrownianStore& store) {
    return detail::simulate_impl(spec, policy, grid, cfg, store, SchemeKind::ThetaMilstein);
}

/// Truncated theta-EM baseline: the same recursion with the Milstein
/// correction terms Q1 and Q2 dropped.
inline Trajectory simulate_em(const ProblemSpec& spec, const TruncationPolicy& policy,
                              const TimeGrid& grid, const SchemeConfig& cfg,
                              const BrownianStore& store) {
    return detail::simulate_impl(spec, policy, grid, cfg, store, SchemeKind::TruncatedEM);
}

}  // namespace sdde
