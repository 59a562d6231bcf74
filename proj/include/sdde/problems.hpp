#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "sdde/harness.hpp"
#include "sdde/model.hpp"
#include "sdde/scheme.hpp"

namespace sdde {

/// A named problem bundled with matching policy, scheme and study
/// defaults; any part can be overridden before use.
struct BuiltinProblem {
    ProblemSpec spec;
    TruncationPolicy policy;
    SchemeConfig scheme;
    StudyPlan plan;
    /// Closed-form terminal value when one exists (gbm).
    std::function<double(const BrownianStore&)> exact_terminal;
};

namespace builtin_detail {

// [t(1-t)]^{3/4}, clamped against tiny negative rounding at the ends.
inline double zeta(double t) {
    const double u = t * (1.0 - t);
    return u > 0.0 ? std::pow(u, 0.75) : 0.0;
}

}  // namespace builtin_detail

/// Scalar delay equation with polynomially growing coefficients:
///   f(t,x,y) = |y|^{5/4}/8 - 5x^3 + 2*zeta(t)*x
///   g(t,x,y) = |x|^{3/2}/2 + zeta(t)*y,   zeta(t) = [t(1-t)]^{3/4}
/// on [0,1], with Lambda(w) = 5w^3 and alpha(dt) = dt^{-1/8}. Delay 1/4
/// and segment xi(t) = 0.5 + 0.1t (Lipschitz, so gamma = 1).
inline BuiltinProblem paper_example() {
    using builtin_detail::zeta;
    BuiltinProblem b;
    b.spec.drift = [](double t, double x, double y) {
        return 0.125 * std::pow(std::abs(y), 1.25) - 5.0 * x * x * x + 2.0 * zeta(t) * x;
    };
    b.spec.diffusion = [](double t, double x, double y) {
        return 0.5 * std::pow(std::abs(x), 1.5) + zeta(t) * y;
    };
    b.spec.diffusion_dx = [](double, double x, double) {
        return std::copysign(0.75 * std::sqrt(std::abs(x)), x);
    };
    b.spec.diffusion_dy = [](double t, double, double) { return zeta(t); };
    b.spec.drift_dx = [](double t, double x, double) {
        return -15.0 * x * x + 2.0 * zeta(t);
    };
    b.spec.drift_dy = [](double, double, double y) {
        return std::copysign(0.15625 * std::pow(std::abs(y), 0.25), y);
    };
    b.spec.delay = 0.25;
    b.spec.horizon = 1.0;
    b.spec.initial_segment = [](double t) { return 0.5 + 0.1 * t; };
    b.spec.growth_beta = 2.0;

    b.policy.lambda = [](double w) { return 5.0 * w * w * w; };
    b.policy.lambda_inv = [](double u) { return std::cbrt(u / 5.0); };
    b.policy.alpha = [](double dt) { return std::pow(dt, -0.125); };
    b.policy.k0 = 5.0;

    b.scheme.theta = 0.5;
    b.scheme.k1_bound = 8.0;

    b.plan.levels = {std::ldexp(1.0, -6), std::ldexp(1.0, -7), std::ldexp(1.0, -8),
                     std::ldexp(1.0, -9)};
    b.plan.reference_dt = std::ldexp(1.0, -11);
    b.plan.num_paths = 2000;
    b.plan.q_bars = {2.0};
    b.plan.seed = 42;
    return b;
}

/// Geometric Brownian motion embedded as a delay problem whose
/// coefficients ignore the delayed argument: f = mu*x, g = sigma*x.
/// Exact terminal value x0 * exp((mu - sigma^2/2) T + sigma B(T)),
/// so convergence studies can run against the true solution.
inline BuiltinProblem gbm(double mu = 0.05, double sigma = 0.2, double x0 = 1.0) {
    BuiltinProblem b;
    b.spec.drift = [mu](double, double x, double) { return mu * x; };
    b.spec.diffusion = [sigma](double, double x, double) { return sigma * x; };
    b.spec.diffusion_dx = [sigma](double, double, double) { return sigma; };
    b.spec.diffusion_dy = [](double, double, double) { return 0.0; };
    b.spec.drift_dx = [mu](double, double, double) { return mu; };
    b.spec.drift_dy = [](double, double, double) { return 0.0; };
    b.spec.delay = 0.25;
    b.spec.horizon = 1.0;
    b.spec.initial_segment = [x0](double) { return x0; };
    b.spec.growth_beta = 0.0;

    // Linear coefficients need no taming.
    b.policy.radius_override = std::numeric_limits<double>::infinity();
    b.policy.lambda = [mu, sigma](double w) { return std::max({std::abs(mu), sigma, 1.0}) * w; };
    b.policy.lambda_inv = [mu, sigma](double u) { return u / std::max({std::abs(mu), sigma, 1.0}); };
    b.policy.alpha = [](double dt) { return std::pow(dt, -0.25); };
    b.policy.k0 = std::max({std::abs(mu), sigma, 1.0});

    b.scheme.theta = 0.5;
    b.scheme.k1_bound = std::max(std::abs(mu), 1.0);

    b.plan.levels = {std::ldexp(1.0, -5), std::ldexp(1.0, -6), std::ldexp(1.0, -7),
                     std::ldexp(1.0, -8), std::ldexp(1.0, -9)};
    b.plan.num_paths = 2000;
    b.plan.q_bars = {2.0};
    b.plan.seed = 42;
    const double horizon = b.spec.horizon;
    b.exact_terminal = [mu, sigma, x0, horizon](const BrownianStore& store) {
        return x0 * std::exp((mu - 0.5 * sigma * sigma) * horizon +
                             sigma * store.terminal_brownian());
    };
    b.plan.exact_terminal = b.exact_terminal;
    return b;
}

/// Linear delay equation f = a*x + b*y, g = c*x + d*y.
inline BuiltinProblem linear_delay(double a = -2.0, double b_coef = 0.5, double c = 0.3,
                                   double d = 0.2) {
    BuiltinProblem b;
    b.spec.drift = [a, b_coef](double, double x, double y) { return a * x + b_coef * y; };
    b.spec.diffusion = [c, d](double, double x, double y) { return c * x + d * y; };
    b.spec.diffusion_dx = [c](double, double, double) { return c; };
    b.spec.diffusion_dy = [d](double, double, double) { return d; };
    b.spec.drift_dx = [a](double, double, double) { return a; };
    b.spec.drift_dy = [b_coef](double, double, double) { return b_coef; };
    b.spec.delay = 0.25;
    b.spec.horizon = 1.0;
    b.spec.initial_segment = [](double t) { return 0.5 + 0.1 * t; };
    b.spec.growth_beta = 0.0;

    const double slope = std::max({std::abs(a) + std::abs(b_coef),
                                   std::abs(c) + std::abs(d), 1.0});
    b.policy.lambda = [slope](double w) { return slope * w; };
    b.policy.lambda_inv = [slope](double u) { return u / slope; };
    b.policy.alpha = [slope](double dt) { return slope * std::pow(dt, -0.25); };
    b.policy.k0 = slope;

    b.scheme.theta = 0.5;
    b.scheme.k1_bound = std::max(1.0, std::abs(a) + std::abs(b_coef));

    b.plan.levels = {std::ldexp(1.0, -5), std::ldexp(1.0, -6), std::ldexp(1.0, -7),
                     std::ldexp(1.0, -8)};
    b.plan.reference_dt = std::ldexp(1.0, -10);
    b.plan.num_paths = 1000;
    b.plan.q_bars = {2.0};
    b.plan.seed = 42;
    return b;
}

}  // namespace sdde
