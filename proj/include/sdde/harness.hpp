#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sdde/errors.hpp"
#include "sdde/model.hpp"
#include "sdde/noise.hpp"
#include "sdde/scheme.hpp"

namespace sdde {

/// Monte Carlo convergence study. Each path owns one master Brownian
/// store at the reference resolution; the reference trajectory and every
/// coarse level read that same path (coupled coarsening). Errors are
/// measured at the terminal time only.
struct StudyPlan {
    std::vector<double> levels;
    /// Self-convergence reference step. Ignored when exact_terminal is
    /// set, in which case the master fine grid is the finest level.
    double reference_dt = 0.0;
    /// Exact terminal value as a function of the path (sanity problems
    /// with a closed-form solution). Empty = self-convergence.
    std::function<double(const BrownianStore&)> exact_terminal;
    int num_paths = 2000;
    std::vector<double> q_bars = {2.0};
    std::uint64_t seed = 0;
    int threads = 1;

    double master_fine_dt() const {
        if (exact_terminal) return *std::min_element(levels.begin(), levels.end());
        return reference_dt;
    }

    void validate(double delay, double horizon) const {
        if (levels.empty()) throw config_error("StudyPlan: no levels");
        if (num_paths < 2) throw config_error("StudyPlan: need at least 2 paths");
        if (q_bars.empty()) throw config_error("StudyPlan: no q_bar exponents");
        for (double q : q_bars)
            if (!(q >= 2.0)) throw config_error("StudyPlan: q_bar exponents must be >= 2");
        const double fine = master_fine_dt();
        if (!(fine > 0.0)) throw config_error("StudyPlan: reference_dt must be positive");
        for (double dt : levels) {
            const auto r = std::llround(dt / fine);
            if (r < 1 || static_cast<double>(r) * fine != dt)
                throw config_error("StudyPlan: level " + std::to_string(dt) +
                                   " is not an integer multiple of the reference step");
            TimeGrid check(delay, horizon, dt);  // levels must divide tau and T exactly
            (void)check;
        }
        if (!exact_terminal) {
            TimeGrid check(delay, horizon, fine);
            (void)check;
        }
    }
};

struct ErrorRow {
    double dt;
    double q_bar;
    double error;       // (mean |x_ref(T) - Y(T)|^q_bar)^{1/q_bar}
    double std_error;   // delta-method standard error of `error`
    int num_paths;
};

struct RateFit {
    double slope;
    double intercept;
    double r2;
};

/// Least-squares line through (log2 dt, log2 error). Throws config_error
/// when fewer than two levels exist for the exponent and eval_error when
/// an error is zero or negative (exact coincidence; drop the level).
inline RateFit fit_rate_points(const std::vector<std::pair<double, double>>& pts) {
    if (pts.size() < 2) throw config_error("fit_rate: need at least 2 levels");
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (const auto& [dt, err] : pts) {
        if (!(err > 0.0))
            throw eval_error("fit_rate: zero or negative error at dt=" + std::to_string(dt) +
                             " (exact coincidence; drop the level)");
        const double x = std::log2(dt);
        const double y = std::log2(err);
        sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
    }
    const double n = static_cast<double>(pts.size());
    const double vx = sxx - sx * sx / n;
    const double cxy = sxy - sx * sy / n;
    const double vy = syy - sy * sy / n;
    if (!(vx > 0.0)) throw config_error("fit_rate: levels are not distinct");
    RateFit fit;
    fit.slope = cxy / vx;
    fit.intercept = (sy - fit.slope * sx) / n;
    fit.r2 = (vy > 0.0) ? (cxy * cxy) / (vx * vy) : 1.0;
    return fit;
}

struct ErrorTable {
    std::vector<ErrorRow> rows;

    RateFit fit(double q_bar) const {
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : rows)
            if (r.q_bar == q_bar) pts.emplace_back(r.dt, r.error);
        return fit_rate_points(pts);
    }
};

inline RateFit fit_rate(const ErrorTable& table, double q_bar) { return table.fit(q_bar); }

namespace detail {

/// Runs fn(p) for p in [0, n) on `threads` workers in fixed chunks;
/// results land in caller-owned per-index slots, so the outcome does not
/// depend on the worker count.
template <typename Fn>
void parallel_paths(std::int64_t n, int threads, Fn&& fn) {
    threads = std::max(1, threads);
    if (threads == 1) {
        for (std::int64_t p = 0; p < n; ++p) fn(p);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(static_cast<std::size_t>(threads));
    const std::int64_t chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const std::int64_t lo = t * chunk;
        const std::int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, t, lo, hi] {
            try {
                for (std::int64_t p = lo; p < hi; ++p) fn(p);
            } catch (...) {
                errs[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Strong-error table for the plan. Any failing path aborts the study
/// with its path index and seed so the case can be reproduced alone.
inline ErrorTable strong_errors(const ProblemSpec& spec, const TruncationPolicy& policy,
                                const SchemeConfig& cfg, const StudyPlan& plan,
                                SchemeKind kind = SchemeKind::ThetaMilstein) {
    plan.validate(spec.delay, spec.horizon);
    const double fine = plan.master_fine_dt();
    const std::int64_t pre = std::llround(spec.delay / fine);
    const std::int64_t main = std::llround(spec.horizon / fine);

    std::vector<double> dts_in_use = plan.levels;
    if (!plan.exact_terminal) dts_in_use.push_back(plan.reference_dt);
    policy.validate_for(dts_in_use);

    std::vector<TimeGrid> grids;
    grids.reserve(plan.levels.size());
    for (double dt : plan.levels) grids.emplace_back(spec.delay, spec.horizon, dt);
    const std::optional<TimeGrid> ref_grid =
        plan.exact_terminal ? std::nullopt
                            : std::optional<TimeGrid>(TimeGrid(spec.delay, spec.horizon, fine));

    const std::size_t n_levels = plan.levels.size();
    const std::size_t n_paths = static_cast<std::size_t>(plan.num_paths);
    // |reference - level| per (level, path); reduced in path order below.
    std::vector<std::vector<double>> diffs(n_levels, std::vector<double>(n_paths, 0.0));

    std::vector<std::pair<std::int64_t, std::exception_ptr>> failures(n_paths);
    detail::parallel_paths(static_cast<std::int64_t>(n_paths), plan.threads, [&](std::int64_t p) {
        try {
            const BrownianStore store(plan.seed, static_cast<std::uint64_t>(p), fine, pre, main);
            const double ref = plan.exact_terminal
                                   ? plan.exact_terminal(store)
                                   : detail::simulate_impl(spec, policy, *ref_grid, cfg, store,
                                                           kind).terminal();
            if (!std::isfinite(ref))
                throw solver_error("reference terminal value not finite", ref);
            for (std::size_t l = 0; l < n_levels; ++l) {
                const Trajectory traj =
                    detail::simulate_impl(spec, policy, grids[l], cfg, store, kind);
                diffs[l][static_cast<std::size_t>(p)] = std::abs(ref - traj.terminal());
            }
        } catch (...) {
            failures[static_cast<std::size_t>(p)] = {p, std::current_exception()};
        }
    });
    for (const auto& [p, err] : failures) {
        if (!err) continue;
        try {
            std::rethrow_exception(err);
        } catch (const std::exception& e) {
            throw simulation_error(std::string("path failed: ") + e.what(), plan.seed,
                                   static_cast<std::uint64_t>(p));
        }
    }

    ErrorTable table;
    for (std::size_t l = 0; l < n_levels; ++l) {
        for (double q : plan.q_bars) {
            double sum = 0.0, sum_sq = 0.0;
            for (double d : diffs[l]) {
                const double z = std::pow(d, q);
                sum += z;
                sum_sq += z * z;
            }
            const double n = static_cast<double>(n_paths);
            const double mean = sum / n;
            const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
            const double err = std::pow(mean, 1.0 / q);
            // First-order delta method on the sample mean of |diff|^q.
            const double se = (mean > 0.0)
                                  ? std::pow(mean, 1.0 / q - 1.0) / q * std::sqrt(var / n)
                                  : 0.0;
            table.rows.push_back({plan.levels[l], q, err, se, plan.num_paths});
        }
    }
    return table;
}

/// Outcome of a moment probe. A non-finite trajectory is reported, not
/// thrown: divergence is a meaningful experimental result for the
/// untruncated contrast runs.
struct MomentReport {
    double max_mean = 0.0;       // max over grid points of mean |Y(t_k)|^p
    bool blew_up = false;
    std::uint64_t first_bad_path = 0;
    std::int64_t first_bad_step = -1;
};

inline MomentReport moment_estimate(const ProblemSpec& spec, const TruncationPolicy& policy,
                                    const SchemeConfig& cfg, const TimeGrid& grid,
                                    int num_paths, double p_exp, std::uint64_t seed,
                                    int threads = 1) {
    if (!(p_exp >= 1.0)) throw config_error("moment_estimate: p must be >= 1");
    if (num_paths < 1) throw config_error("moment_estimate: need at least one path");
    const double fine = grid.dt();
    const std::int64_t pre = grid.m_delay();
    const std::int64_t main = grid.m_total();
    const std::size_t n_vals = static_cast<std::size_t>(grid.num_values());

    // Fixed chunk partition; partials are combined in chunk order so the
    // reduction is identical for every worker count.
    const int n_chunks = 64;
    std::vector<std::vector<double>> partial(n_chunks, std::vector<double>(n_vals, 0.0));
    std::vector<MomentReport> chunk_report(n_chunks);
    const std::int64_t per = (num_paths + n_chunks - 1) / n_chunks;

    detail::parallel_paths(n_chunks, threads, [&](std::int64_t chunk) {
        const std::int64_t lo = chunk * per;
        const std::int64_t hi = std::min<std::int64_t>(num_paths, lo + per);
        auto& acc = partial[static_cast<std::size_t>(chunk)];
        auto& rep = chunk_report[static_cast<std::size_t>(chunk)];
        for (std::int64_t p = lo; p < hi; ++p) {
            const BrownianStore store(seed, static_cast<std::uint64_t>(p), fine, pre, main);
            Trajectory traj(grid);
            bool bad = false;
            try {
                traj = simulate(spec, policy, grid, cfg, store);
            } catch (const solver_error&) {
                bad = true;  // overflow in the explicit update or the solve
            }
            if (!bad) {
                for (std::size_t i = 0; i < n_vals; ++i) {
                    const double v = std::pow(std::abs(traj.values[i]), p_exp);
                    if (!std::isfinite(v)) {
                        bad = true;
                        rep.first_bad_step =
                            static_cast<std::int64_t>(i) - grid.m_delay();
                        break;
                    }
                    acc[i] += v;
                }
            }
            if (bad && !rep.blew_up) {
                rep.blew_up = true;
                rep.first_bad_path = static_cast<std::uint64_t>(p);
            }
        }
    });

    MomentReport out;
    for (const auto& rep : chunk_report) {
        if (rep.blew_up && !out.blew_up) {
            out.blew_up = true;
            out.first_bad_path = rep.first_bad_path;
            out.first_bad_step = rep.first_bad_step;
        }
    }
    if (out.blew_up) {
        out.max_mean = std::numeric_limits<double>::infinity();
        return out;
    }
    for (std::size_t i = 0; i < n_vals; ++i) {
        double total = 0.0;
        for (int ch = 0; ch < n_chunks; ++ch) total += partial[static_cast<std::size_t>(ch)][i];
        out.max_mean = std::max(out.max_mean, total / num_paths);
    }
    return out;
}

}  // namespace sdde
