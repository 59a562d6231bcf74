#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdde/errors.hpp"
#include "sdde/expr.hpp"
#include "sdde/model.hpp"

namespace sdde {

// Sample-based falsification of the structural assumptions. A probe can
// only ever report "no violation found among N samples" -- the
// assumptions quantify over unbounded domains -- but a located violation
// is a definite counterexample for the probed constants on the box.

enum class AssumptionKind {
    A1_PolyLipschitz,   // polynomially weighted Lipschitz bound on f, g
    A2_MonotoneU,       // monotonicity with the coupling functional U
    A3_Khasminskii,     // one-sided growth bound (p-th moment condition)
    A4_TimeHolder,      // Holder continuity in time
    A5_InitialHolder,   // Holder continuity of the initial segment
    A6_DerivGrowth,     // polynomial growth of first/second partials
    A39_Monotone,       // monotonicity without a coupling functional
};

inline const char* assumption_name(AssumptionKind k) {
    switch (k) {
        case AssumptionKind::A1_PolyLipschitz: return "A1-polyLipschitz";
        case AssumptionKind::A2_MonotoneU: return "A2-monotoneU";
        case AssumptionKind::A3_Khasminskii: return "A3-khasminskii";
        case AssumptionKind::A4_TimeHolder: return "A4-timeHolder";
        case AssumptionKind::A5_InitialHolder: return "A5-initialHolder";
        case AssumptionKind::A6_DerivGrowth: return "A6-derivGrowth";
        case AssumptionKind::A39_Monotone: return "A39-monotone";
    }
    return "?";
}

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    double map(double u) const { return lo + (hi - lo) * u; }
};

struct AssumptionCase {
    AssumptionKind kind = AssumptionKind::A3_Khasminskii;
    /// The assumption's leading constant: Kbar (A1), K1 (A2), K2 (A3),
    /// K3 (A4), K4 (A5), K5 (A6), K1-hat (A39).
    double k_main = 1.0;
    double q = 2.0;      // A2 / A39
    double p = 3.0;      // A3
    double beta = 0.0;   // A1 / A4 / A6
    double sigma = 1.0;  // A4
    double gamma = 1.0;  // A5
    /// A2 coupling functional U(m, n), parsed over variables {m, n}.
    std::optional<Expr> u;
    Interval t_box{0.0, 1.0};
    Interval x_box{-1.0, 1.0};
    Interval y_box{-1.0, 1.0};
    long samples = 10000;
    /// Finite-difference fallback for missing drift partials (A6).
    /// Off by default; when enabled the report notes the approximation.
    bool allow_finite_difference = false;

    void validate() const {
        if (!(k_main > 0.0)) throw config_error("AssumptionCase: main constant must be > 0");
        if (kind == AssumptionKind::A2_MonotoneU || kind == AssumptionKind::A39_Monotone)
            if (!(q >= 2.0)) throw config_error("AssumptionCase: q must be >= 2");
        if (kind == AssumptionKind::A3_Khasminskii)
            if (!(p > 2.0)) throw config_error("AssumptionCase: p must be > 2");
        if (kind == AssumptionKind::A4_TimeHolder)
            if (!(sigma > 0.0 && sigma <= 1.0))
                throw config_error("AssumptionCase: sigma must lie in (0, 1]");
        if (kind == AssumptionKind::A5_InitialHolder)
            if (!(gamma > 0.0 && gamma <= 1.0))
                throw config_error("AssumptionCase: gamma must lie in (0, 1]");
        if (!(beta >= 0.0)) throw config_error("AssumptionCase: beta must be >= 0");
        if (samples < 1) throw config_error("AssumptionCase: samples must be >= 1");
        if (kind == AssumptionKind::A2_MonotoneU && !u)
            throw config_error("AssumptionCase: A2 requires the coupling functional U");
    }
};

/// max_violation > 0 means the inequality failed at the recorded point
/// (LHS - RHS, rearranged so that <= 0 is "holds"). Values within
/// kTolerance of zero are floating-point noise on exact-equality cases.
struct ProbeReport {
    static constexpr double kTolerance = 1e-9;

    double max_violation = -std::numeric_limits<double>::infinity();
    double at_t = 0.0, at_x = 0.0, at_y = 0.0, at_xbar = 0.0, at_ybar = 0.0;
    long samples_tested = 0;
    std::string note;

    bool found_violation() const { return max_violation > kTolerance; }
};

namespace detail {

inline double halton(std::uint64_t index, std::uint32_t base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

constexpr std::uint32_t kHaltonBases[5] = {2, 3, 5, 7, 11};

inline int case_dims(AssumptionKind k) {
    switch (k) {
        case AssumptionKind::A1_PolyLipschitz:
        case AssumptionKind::A2_MonotoneU:
        case AssumptionKind::A39_Monotone: return 5;
        case AssumptionKind::A4_TimeHolder: return 4;
        case AssumptionKind::A3_Khasminskii:
        case AssumptionKind::A6_DerivGrowth: return 3;
        case AssumptionKind::A5_InitialHolder: return 2;
    }
    return 0;
}

inline Interval dim_box(const AssumptionCase& c, int dim) {
    switch (c.kind) {
        case AssumptionKind::A1_PolyLipschitz:
        case AssumptionKind::A2_MonotoneU:
        case AssumptionKind::A39_Monotone: {
            const Interval boxes[5] = {c.t_box, c.x_box, c.y_box, c.x_box, c.y_box};
            return boxes[dim];
        }
        case AssumptionKind::A4_TimeHolder: {
            const Interval boxes[4] = {c.t_box, c.t_box, c.x_box, c.y_box};
            return boxes[dim];
        }
        case AssumptionKind::A3_Khasminskii:
        case AssumptionKind::A6_DerivGrowth: {
            const Interval boxes[3] = {c.t_box, c.x_box, c.y_box};
            return boxes[dim];
        }
        case AssumptionKind::A5_InitialHolder:
            return c.t_box;
    }
    return {};
}

/// Index pairs (u, u-bar) sharing a box, targeted by the separation scan.
inline std::vector<std::pair<int, int>> case_pairs(AssumptionKind k) {
    switch (k) {
        case AssumptionKind::A1_PolyLipschitz:
        case AssumptionKind::A2_MonotoneU:
        case AssumptionKind::A39_Monotone: return {{1, 3}, {2, 4}};
        case AssumptionKind::A4_TimeHolder:
        case AssumptionKind::A5_InitialHolder: return {{0, 1}};
        default: return {};
    }
}

/// Deterministic point enumeration: box corners, midpoints, a
/// quasi-random (Halton) bulk, and for paired coordinates a separation
/// scan around quasi-random base points. Monotone-type inequalities live
/// on pair differences, so the scan walks the u-bar coordinate through
/// equal, mirrored, and offset-by-h*width geometries across fourteen
/// decades of h. The enumeration is nested: growing `samples` only adds
/// points, so the reported maximum cannot decrease.
template <typename Fn>
long enumerate_case_points(const AssumptionCase& c, Fn&& visit) {
    const int d = case_dims(c.kind);
    Interval boxes[5];
    for (int i = 0; i < d; ++i) boxes[i] = dim_box(c, i);
    double pt[5] = {0, 0, 0, 0, 0};
    long count = 0;

    // Corners.
    for (int mask = 0; mask < (1 << d); ++mask) {
        for (int i = 0; i < d; ++i) pt[i] = (mask >> i & 1) ? boxes[i].hi : boxes[i].lo;
        visit(pt);
        ++count;
    }
    // Midpoint.
    for (int i = 0; i < d; ++i) pt[i] = boxes[i].mid();
    visit(pt);
    ++count;
    // Diagonal corners: paired coordinates equal, the rest at corners.
    const auto pairs = case_pairs(c.kind);
    if (!pairs.empty()) {
        std::vector<int> free_dims;
        for (int i = 0; i < d; ++i) {
            bool is_bar = false;
            for (const auto& [a, b] : pairs) is_bar = is_bar || i == b;
            if (!is_bar) free_dims.push_back(i);
        }
        const int fd = static_cast<int>(free_dims.size());
        for (int mask = 0; mask < (1 << fd); ++mask) {
            for (int j = 0; j < fd; ++j) {
                const int i = free_dims[j];
                pt[i] = (mask >> j & 1) ? boxes[i].hi : boxes[i].lo;
            }
            for (const auto& [a, b] : pairs) pt[b] = pt[a];
            visit(pt);
            ++count;
        }
    }
    // Quasi-random bulk.
    for (long s = 1; s <= c.samples; ++s) {
        for (int i = 0; i < d; ++i)
            pt[i] = boxes[i].map(halton(static_cast<std::uint64_t>(s), kHaltonBases[i]));
        visit(pt);
        ++count;
    }
    // Separation scan over pair geometries.
    if (!pairs.empty()) {
        static constexpr double kLadder[] = {1e-1, 1e-2, 1e-4, 1e-6, 1e-8,
                                             1e-10, 1e-12, 1e-14};
        const long bases = std::min<long>(c.samples, 256);
        const int n_geo = 2 + static_cast<int>(std::size(kLadder));  // equal, mirror, offsets
        std::vector<int> geo(pairs.size());
        for (long s = 1; s <= bases; ++s) {
            double base[5];
            for (int i = 0; i < d; ++i)
                base[i] = boxes[i].map(halton(static_cast<std::uint64_t>(s), kHaltonBases[i]));
            std::fill(geo.begin(), geo.end(), 0);
            for (;;) {
                for (int i = 0; i < d; ++i) pt[i] = base[i];
                for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
                    const auto [a, b] = pairs[pi];
                    const int g = geo[pi];
                    if (g == 0) pt[b] = pt[a];
                    else if (g == 1) pt[b] = -pt[a];
                    else pt[b] = pt[a] - kLadder[g - 2] * boxes[a].width();
                }
                visit(pt);
                ++count;
                // Odometer over geometry combinations.
                std::size_t pi = 0;
                while (pi < geo.size() && ++geo[pi] == n_geo) geo[pi++] = 0;
                if (pi == geo.size()) break;
            }
        }
    }
    return count;
}

inline double fd_of(const CoeffFn& fn, int arg, double t, double x, double y) {
    const double u = (arg == 1) ? x : y;
    const double h = std::max(1e-6, 1e-6 * std::abs(u));
    if (arg == 1) return (fn(t, x + h, y) - fn(t, x - h, y)) / (2.0 * h);
    return (fn(t, x, y + h) - fn(t, x, y - h)) / (2.0 * h);
}

}  // namespace detail

/// Evaluates the case's inequality, rearranged as LHS - RHS, at one
/// point (layout per kind; see ProbeReport slot mapping in probe_assumption).
inline double assumption_violation(const ProblemSpec& spec, const AssumptionCase& c,
                                   const double pt[5]) {
    switch (c.kind) {
        case AssumptionKind::A1_PolyLipschitz: {
            const double t = pt[0], x = pt[1], y = pt[2], xb = pt[3], yb = pt[4];
            const double df = std::abs(spec.drift(t, x, y) - spec.drift(t, xb, yb));
            const double dg = std::abs(spec.diffusion(t, x, y) - spec.diffusion(t, xb, yb));
            const double weight = 1.0 + std::pow(std::abs(x), c.beta) +
                                  std::pow(std::abs(y), c.beta) +
                                  std::pow(std::abs(xb), c.beta) +
                                  std::pow(std::abs(yb), c.beta);
            return std::max(df, dg) -
                   c.k_main * weight * (std::abs(x - xb) + std::abs(y - yb));
        }
        case AssumptionKind::A2_MonotoneU:
        case AssumptionKind::A39_Monotone: {
            const double t = pt[0], x = pt[1], y = pt[2], xb = pt[3], yb = pt[4];
            const double df = spec.drift(t, x, y) - spec.drift(t, xb, yb);
            const double dg = spec.diffusion(t, x, y) - spec.diffusion(t, xb, yb);
            const double cx = x - xb, cy = y - yb;
            double v = cx * df + (c.q - 1.0) * dg * dg - c.k_main * (cx * cx + cy * cy);
            if (c.kind == AssumptionKind::A2_MonotoneU) {
                const double ux[2] = {x, xb};
                const double uy[2] = {y, yb};
                v += c.u->eval(std::span<const double>(ux, 2)) -
                     c.u->eval(std::span<const double>(uy, 2));
            }
            return v;
        }
        case AssumptionKind::A3_Khasminskii: {
            const double t = pt[0], x = pt[1], y = pt[2];
            const double g = spec.diffusion(t, x, y);
            return x * spec.drift(t, x, y) + (c.p - 1.0) * g * g -
                   c.k_main * (1.0 + x * x + y * y);
        }
        case AssumptionKind::A4_TimeHolder: {
            const double t1 = pt[0], t2 = pt[1], x = pt[2], y = pt[3];
            const double df = std::abs(spec.drift(t1, x, y) - spec.drift(t2, x, y));
            const double dg = std::abs(spec.diffusion(t1, x, y) - spec.diffusion(t2, x, y));
            const double weight = 1.0 + std::pow(std::abs(x), c.beta + 1.0) +
                                  std::pow(std::abs(y), c.beta + 1.0);
            return std::max(df, dg) -
                   c.k_main * weight * std::pow(std::abs(t1 - t2), c.sigma);
        }
        case AssumptionKind::A5_InitialHolder: {
            const double t = pt[0], s = pt[1];
            return std::abs(spec.initial_segment(t) - spec.initial_segment(s)) -
                   c.k_main * std::pow(std::abs(t - s), c.gamma);
        }
        case AssumptionKind::A6_DerivGrowth: {
            const double t = pt[0], x = pt[1], y = pt[2];
            double vals[10];
            int n = 0;
            const double fx = spec.drift_dx ? spec.drift_dx(t, x, y)
                                            : detail::fd_of(spec.drift, 1, t, x, y);
            const double fy = spec.drift_dy ? spec.drift_dy(t, x, y)
                                            : detail::fd_of(spec.drift, 2, t, x, y);
            vals[n++] = fx;
            vals[n++] = fy;
            vals[n++] = spec.diffusion_dx(t, x, y);
            vals[n++] = spec.diffusion_dy(t, x, y);
            const CoeffFn fdx = spec.drift_dx ? spec.drift_dx
                                              : finite_difference_partial(spec.drift, 1);
            const CoeffFn fdy = spec.drift_dy ? spec.drift_dy
                                              : finite_difference_partial(spec.drift, 2);
            vals[n++] = detail::fd_of(fdx, 1, t, x, y);  // f11
            vals[n++] = detail::fd_of(fdx, 2, t, x, y);  // f12
            vals[n++] = detail::fd_of(fdy, 2, t, x, y);  // f22
            vals[n++] = detail::fd_of(spec.diffusion_dx, 1, t, x, y);  // g11
            vals[n++] = detail::fd_of(spec.diffusion_dx, 2, t, x, y);  // g12
            vals[n++] = detail::fd_of(spec.diffusion_dy, 2, t, x, y);  // g22
            double m = 0.0;
            for (int i = 0; i < n; ++i) m = std::max(m, std::abs(vals[i]));
            const double weight = 1.0 + std::pow(std::abs(x), c.beta + 1.0) +
                                  std::pow(std::abs(y), c.beta + 1.0);
            return m - c.k_main * weight;
        }
    }
    throw config_error("assumption_violation: unknown kind");
}

/// Probes one assumption case. Report slots (at_t, at_x, at_y, at_xbar,
/// at_ybar) hold the arg-max point in the kind's coordinate order:
/// (t, x, y, xbar, ybar) for A1/A2/A39, (t1, t2, x, y, -) for A4,
/// (t, s, -, -, -) for A5, (t, x, y, -, -) for A3/A6.
inline ProbeReport probe_assumption(const ProblemSpec& spec, const AssumptionCase& c) {
    c.validate();
    if (c.kind == AssumptionKind::A6_DerivGrowth && !c.allow_finite_difference &&
        (!spec.drift_dx || !spec.drift_dy)) {
        std::string missing;
        if (!spec.drift_dx) missing += " drift_dx";
        if (!spec.drift_dy) missing += " drift_dy";
        throw capability_error("A6 probe requires analytic partials (missing:" + missing +
                               "); enable the finite-difference fallback to approximate them");
    }
    if (c.kind == AssumptionKind::A5_InitialHolder && !spec.initial_segment)
        throw capability_error("A5 probe requires the initial segment");

    ProbeReport rep;
    rep.samples_tested = detail::enumerate_case_points(c, [&](const double pt[5]) {
        const double v = assumption_violation(spec, c, pt);
        if (v > rep.max_violation) {
            rep.max_violation = v;
            rep.at_t = pt[0];
            rep.at_x = pt[1];
            rep.at_y = pt[2];
            rep.at_xbar = pt[3];
            rep.at_ybar = pt[4];
        }
    });
    if (c.kind == AssumptionKind::A6_DerivGrowth) {
        rep.note = "second partials by central finite differences";
        if (!spec.drift_dx || !spec.drift_dy) rep.note += "; drift partials too";
    }
    if (!rep.found_violation())
        rep.note += std::string(rep.note.empty() ? "" : "; ") + "no violation found among " +
                    std::to_string(rep.samples_tested) + " samples";
    return rep;
}

/// Checks the Lambda domination condition: for each w, the sampled sup of
/// |f| v |g| v |g1| v |g2| over t in [0, T], |x| v |y| <= w must stay
/// below Lambda(w). Corner samples (x, y = +-w) are always included.
inline ProbeReport probe_lambda_bound(const ProblemSpec& spec, const TruncationPolicy& policy,
                                      std::span<const double> w_samples,
                                      long samples_per_w = 10000) {
    ProbeReport rep;
    for (double w : w_samples) {
        if (!(w >= 1.0)) throw config_error("probe_lambda_bound: w must be >= 1");
        const double lam = policy.lambda(w);
        double sup = 0.0;
        double arg[3] = {0, 0, 0};
        const auto consider = [&](double t, double x, double y) {
            const double m =
                std::max({std::abs(spec.drift(t, x, y)), std::abs(spec.diffusion(t, x, y)),
                          std::abs(spec.diffusion_dx(t, x, y)),
                          std::abs(spec.diffusion_dy(t, x, y))});
            if (m > sup) {
                sup = m;
                arg[0] = t;
                arg[1] = x;
                arg[2] = y;
            }
            ++rep.samples_tested;
        };
        for (double t : {0.0, 0.5 * spec.horizon, spec.horizon})
            for (double x : {-w, 0.0, w})
                for (double y : {-w, 0.0, w}) consider(t, x, y);
        for (long s = 1; s <= samples_per_w; ++s) {
            const double t = spec.horizon * detail::halton(s, 2);
            const double x = w * (2.0 * detail::halton(s, 3) - 1.0);
            const double y = w * (2.0 * detail::halton(s, 5) - 1.0);
            consider(t, x, y);
        }
        const double v = sup - lam;
        if (v > rep.max_violation) {
            rep.max_violation = v;
            rep.at_t = arg[0];
            rep.at_x = arg[1];
            rep.at_y = arg[2];
            rep.at_xbar = w;
            rep.at_ybar = lam;
        }
        rep.note += (rep.note.empty() ? "" : "; ") + std::string("w=") + std::to_string(w) +
                    ": sup=" + std::to_string(sup) + ", Lambda=" + std::to_string(lam);
    }
    return rep;
}

/// Diagnostic for the local bound U(m, n) <= rho * |m - n|^2: estimates
/// sup U / |m - n|^2 over |m| v |n| <= varsigma. Cannot certify
/// finiteness; reports the largest sampled ratio.
inline double u_local_constant(const Expr& u, double varsigma, long samples = 20000) {
    double sup = 0.0;
    for (long s = 1; s <= samples; ++s) {
        const double m = varsigma * (2.0 * detail::halton(s, 2) - 1.0);
        double n = varsigma * (2.0 * detail::halton(s, 3) - 1.0);
        if (m == n) n = std::nextafter(n, varsigma);
        const double vals[2] = {m, n};
        const double ratio =
            u.eval(std::span<const double>(vals, 2)) / ((m - n) * (m - n));
        sup = std::max(sup, ratio);
        // Near-diagonal scan around the same base point.
        for (double h : {1e-2, 1e-4, 1e-6, 1e-8}) {
            const double nn = m - h * varsigma;
            const double vv[2] = {m, nn};
            sup = std::max(sup, u.eval(std::span<const double>(vv, 2)) /
                                    ((m - nn) * (m - nn)));
        }
    }
    return sup;
}

}  // namespace sdde
