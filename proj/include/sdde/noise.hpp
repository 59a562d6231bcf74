#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdde/errors.hpp"
#include "sdde/rng.hpp"

namespace sdde {

/// Own-noise iterated integral over one step, exact in the step
/// increment: Q1 = ((dB)^2 - dt) / 2.
inline double q1(double delta_b, double dt) {
    return 0.5 * (delta_b * delta_b - dt);
}

/// One master Brownian path on a fine grid covering [-tau, T].
///
/// The path is stored as i.i.d. N(0, fine_dt) increments: pre_steps of
/// them cover [-tau, 0) and main_steps cover [0, T]. Every coarser level
/// reads this one path, so all levels of a convergence study are coupled
/// to the same Brownian motion. Increment i is a pure function of
/// (seed, path_index, i); regeneration is bitwise identical regardless
/// of how paths are distributed over workers.
class BrownianStore {
public:
    BrownianStore(std::uint64_t seed, std::uint64_t path_index, double fine_dt,
                  std::int64_t pre_steps, std::int64_t main_steps)
        : seed_(seed), path_(path_index), fine_dt_(fine_dt),
          pre_(pre_steps), main_(main_steps) {
        if (!(fine_dt > 0.0)) throw config_error("BrownianStore: fine_dt must be positive");
        if (pre_steps < 0 || main_steps < 1)
            throw config_error("BrownianStore: need pre_steps >= 0 and main_steps >= 1");
        const double sd = std::sqrt(fine_dt);
        increments_.resize(static_cast<std::size_t>(pre_ + main_));
        for (std::size_t i = 0; i < increments_.size(); ++i)
            increments_[i] = sd * counter_normal(seed_, path_, i);
    }

    /// Builds a store from explicit increments (test hook for forced
    /// paths and hand-computed oracles).
    static BrownianStore from_increments(std::vector<double> increments, double fine_dt,
                                         std::int64_t pre_steps) {
        BrownianStore s;
        s.fine_dt_ = fine_dt;
        s.pre_ = pre_steps;
        s.main_ = static_cast<std::int64_t>(increments.size()) - pre_steps;
        if (!(fine_dt > 0.0) || s.main_ < 1 || pre_steps < 0)
            throw config_error("BrownianStore::from_increments: inconsistent sizes");
        s.increments_ = std::move(increments);
        return s;
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t path_index() const noexcept { return path_; }
    double fine_dt() const noexcept { return fine_dt_; }
    std::int64_t pre_steps() const noexcept { return pre_; }
    std::int64_t main_steps() const noexcept { return main_; }
    std::span<const double> increments() const noexcept { return increments_; }

    /// Fine steps per level step; throws alignment_error when level_dt is
    /// not an integer multiple of fine_dt.
    std::int64_t ratio_of(double level_dt) const {
        const std::int64_t r = static_cast<std::int64_t>(std::llround(level_dt / fine_dt_));
        if (r < 1 || static_cast<double>(r) * fine_dt_ != level_dt)
            throw alignment_error("level dt " + std::to_string(level_dt) +
                                  " is not an integer multiple of the fine dt " +
                                  std::to_string(fine_dt_));
        return r;
    }

    /// Brownian increment of level step k, k in [-pre/R, main/R); the sum
    /// of the fine increments spanning [k*level_dt, (k+1)*level_dt).
    double coarse_increment(double level_dt, std::int64_t k) const {
        const std::int64_t r = ratio_of(level_dt);
        const std::int64_t base = pre_ + k * r;
        if (base < 0 || base + r > pre_ + main_)
            throw config_error("coarse_increment: step index out of range");
        double sum = 0.0;
        for (std::int64_t j = 0; j < r; ++j)
            sum += increments_[static_cast<std::size_t>(base + j)];
        return sum;
    }

    /// Delayed cross integral over level step k >= m_delay,
    ///   Q2 = int_{t_k}^{t_{k+1}} ( B(s - tau) - B(t_k - tau) ) dB(s),
    /// realized as the left-point Ito sum over the fine sub-steps. The
    /// delayed window sits exactly m_delay level steps behind the
    /// integrating window, so for m_delay >= 1 the two windows are
    /// disjoint and the sum has the exact Ito isometry variance
    /// dt^2/2 * (1 - 1/R).
    double q2(double level_dt, std::int64_t k, std::int64_t m_delay) const {
        if (k < m_delay)
            throw config_error("q2: requires k >= m_delay (the scheme has no Q2 term before "
                               "the first delay interval)");
        const std::int64_t r = ratio_of(level_dt);
        const std::int64_t own = pre_ + k * r;
        const std::int64_t delayed = own - m_delay * r;
        if (delayed < 0 || own + r > pre_ + main_)
            throw config_error("q2: step index out of range");
        double walked = 0.0;  // B(s_j - tau) - B(t_k - tau)
        double acc = 0.0;
        for (std::int64_t j = 0; j < r; ++j) {
            acc += walked * increments_[static_cast<std::size_t>(own + j)];
            walked += increments_[static_cast<std::size_t>(delayed + j)];
        }
        return acc;
    }

    /// B(T): the sum of every fine increment on [0, T].
    double terminal_brownian() const {
        double sum = 0.0;
        for (std::int64_t j = 0; j < main_; ++j)
            sum += increments_[static_cast<std::size_t>(pre_ + j)];
        return sum;
    }

    /// Binary dump: magic "SDDEB1", then seed, path index, fine_dt as a
    /// dyadic rational (numerator, power-of-two denominator), increment
    /// count, and the raw increments; all fields little-endian 64-bit.
    void dump(std::ostream& os) const {
        os.write("SDDEB1", 6);
        write_u64(os, seed_);
        write_u64(os, path_);
        const auto [num, den] = dyadic_of(fine_dt_);
        write_u64(os, num);
        write_u64(os, den);
        write_u64(os, increments_.size());
        for (double v : increments_) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            write_u64(os, bits);
        }
    }

    struct DumpRecord {
        std::uint64_t seed;
        std::uint64_t path_index;
        std::uint64_t delta_num;
        std::uint64_t delta_den;
        std::vector<double> increments;
        double fine_dt() const {
            return static_cast<double>(delta_num) / static_cast<double>(delta_den);
        }
    };

    static DumpRecord load_dump(std::istream& is) {
        char magic[6];
        is.read(magic, 6);
        if (!is || std::memcmp(magic, "SDDEB1", 6) != 0)
            throw config_error("path dump: bad magic");
        DumpRecord rec;
        rec.seed = read_u64(is);
        rec.path_index = read_u64(is);
        rec.delta_num = read_u64(is);
        rec.delta_den = read_u64(is);
        const std::uint64_t n = read_u64(is);
        rec.increments.resize(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            const std::uint64_t bits = read_u64(is);
            std::memcpy(&rec.increments[i], &bits, 8);
        }
        if (!is) throw config_error("path dump: truncated stream");
        return rec;
    }

private:
    BrownianStore() = default;

    // fine_dt = num / den with den a power of two; exact for the dyadic
    // step sizes used in practice. Throws when the denominator would not
    // fit 64 bits (a non-dyadic fine grid).
    static std::pair<std::uint64_t, std::uint64_t> dyadic_of(double v) {
        int e = 0;
        const double m = std::frexp(v, &e);  // v = m * 2^e, m in [0.5, 1)
        std::uint64_t num = static_cast<std::uint64_t>(std::ldexp(m, 53));
        int den_pow = 53 - e;
        while (num != 0 && (num & 1u) == 0 && den_pow > 0) {
            num >>= 1;
            --den_pow;
        }
        if (den_pow < 0 || den_pow > 63)
            throw config_error("path dump: fine_dt is not a dyadic rational with a 64-bit "
                               "denominator");
        return {num, std::uint64_t(1) << den_pow};
    }

    static void write_u64(std::ostream& os, std::uint64_t v) {
        char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
        os.write(b, 8);
    }

    static std::uint64_t read_u64(std::istream& is) {
        unsigned char b[8];
        is.read(reinterpret_cast<char*>(b), 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
        return v;
    }

    std::uint64_t seed_ = 0;
    std::uint64_t path_ = 0;
    double fine_dt_ = 0.0;
    std::int64_t pre_ = 0;
    std::int64_t main_ = 0;
    std::vector<double> increments_;
};

}  // namespace sdde
