#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include "sdde/errors.hpp"

namespace sdde {

// Counter-based generator: every variate is a pure function of
// (seed, stream, index), so path ensembles are reproducible bit-for-bit
// no matter how work is split across threads.
//
// Philox4x32-10, Salmon et al., "Parallel random numbers: as easy as
// 1, 2, 3", SC 2011.
struct Philox4x32 {
    static constexpr std::uint32_t kMultA = 0xD2511F53u;
    static constexpr std::uint32_t kMultB = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t prod_a = std::uint64_t(kMultA) * ctr[0];
            const std::uint64_t prod_b = std::uint64_t(kMultB) * ctr[2];
            const std::array<std::uint32_t, 4> next = {
                static_cast<std::uint32_t>(prod_b >> 32) ^ ctr[1] ^ key[0],
                static_cast<std::uint32_t>(prod_b),
                static_cast<std::uint32_t>(prod_a >> 32) ^ ctr[3] ^ key[1],
                static_cast<std::uint32_t>(prod_a),
            };
            ctr = next;
            key[0] += kWeylA;
            key[1] += kWeylB;
        }
        return ctr;
    }
};

/// 64 uniform bits for (seed, stream, index).
inline std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t stream,
                                  std::uint64_t index) {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(stream),
        static_cast<std::uint32_t>(stream >> 32),
        static_cast<std::uint32_t>(index),
        static_cast<std::uint32_t>(index >> 32),
    };
    const std::array<std::uint32_t, 2> key = {
        static_cast<std::uint32_t>(seed),
        static_cast<std::uint32_t>(seed >> 32),
    };
    const auto out = Philox4x32::block(ctr, key);
    return (std::uint64_t(out[0]) << 32) | out[1];
}

/// Uniform in the open interval (0, 1); never returns 0 or 1, so the
/// normal inverse CDF below is always finite.
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t index) {
    const std::uint64_t bits = counter_bits(seed, stream, index);
    return static_cast<double>(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

/// Inverse of the standard normal CDF (Wichura's algorithm AS 241,
/// double-precision variant), accurate to about 1e-16 relative.
inline double normal_inverse_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw eval_error("normal_inverse_cdf: p outside (0,1)");

    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                  6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
              1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
        const double den =
            (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                  3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
              4.2313330701600911252e+1) * r + 1.0);
        return q * num / den;
    }

    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
        val = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
        const double den =
            ((((((1.42151175831644588870e-15 * r + 1.84631831751005468180e-6) * r +
                 7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r +
               1.36929880922735805310e-1) * r + 5.99832206555887937690e-1) * r + 1.0);
        val = num / den;
    }
    return (q < 0.0) ? -val : val;
}

/// Standard normal variate for (seed, stream, index).
inline double counter_normal(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t index) {
    return normal_inverse_cdf(counter_uniform(seed, stream, index));
}

}  // namespace sdde
