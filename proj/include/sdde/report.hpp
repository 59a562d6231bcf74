#pragma once

#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdde/harness.hpp"
#include "sdde/probe.hpp"
#include "sdde/scheme.hpp"

namespace sdde {

/// 17 significant digits: round-trip exact for binary64.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "k,t,y,newton_iters,truncated\n";
    const auto m = traj.grid.m_delay();
    for (std::int64_t k = -m; k <= traj.grid.m_total(); ++k) {
        const bool interior = k > 0;
        os << k << ',' << fmt17(traj.grid.time_of(k)) << ',' << fmt17(traj.value_at(k)) << ','
           << (interior ? traj.newton_iters[static_cast<std::size_t>(k - 1)] : 0) << ','
           << (interior ? int(traj.truncated[static_cast<std::size_t>(k - 1)]) : 0) << '\n';
    }
}

inline void write_errors_csv(std::ostream& os, const ErrorTable& table) {
    os << "dt,q_bar,error,stderr,num_paths\n";
    for (const auto& r : table.rows)
        os << fmt17(r.dt) << ',' << fmt17(r.q_bar) << ',' << fmt17(r.error) << ','
           << fmt17(r.std_error) << ',' << r.num_paths << '\n';
}

inline void write_probe_csv(std::ostream& os,
                            std::span<const std::pair<std::string, ProbeReport>> reports) {
    os << "assumption,max_violation,at_t,at_x,at_y,at_xbar,at_ybar,samples\n";
    for (const auto& [name, rep] : reports)
        os << name << ',' << fmt17(rep.max_violation) << ',' << fmt17(rep.at_t) << ','
           << fmt17(rep.at_x) << ',' << fmt17(rep.at_y) << ',' << fmt17(rep.at_xbar) << ','
           << fmt17(rep.at_ybar) << ',' << rep.samples_tested << '\n';
}

/// Static log2-log2 scatter of the error table with the fitted lines.
/// Each plotted point carries its source row in data-* attributes so the
/// figure can be cross-checked against errors.csv.
inline void write_rate_svg(std::ostream& os, const ErrorTable& table,
                           std::span<const std::pair<double, RateFit>> fits) {
    const double W = 640, H = 480, ml = 70, mr = 20, mt = 20, mb = 50;
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (const auto& r : table.rows) {
        if (!(r.error > 0.0)) continue;
        const double x = std::log2(r.dt), y = std::log2(r.error);
        x_lo = std::min(x_lo, x); x_hi = std::max(x_hi, x);
        y_lo = std::min(y_lo, y); y_hi = std::max(y_hi, y);
    }
    if (x_hi <= x_lo) { x_lo -= 1; x_hi += 1; }
    if (y_hi <= y_lo) { y_lo -= 1; y_hi += 1; }
    const double padx = 0.05 * (x_hi - x_lo), pady = 0.08 * (y_hi - y_lo);
    x_lo -= padx; x_hi += padx; y_lo -= pady; y_hi += pady;
    const auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (W - ml - mr); };
    const auto py = [&](double y) { return H - mb - (y - y_lo) / (y_hi - y_lo) * (H - mt - mb); };

    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
       << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H
       << "\" fill=\"white\"/>\n";
    // Axes.
    os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
       << H - mb << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
       << "\" stroke=\"black\"/>\n";
    for (int xt = static_cast<int>(std::ceil(x_lo)); xt <= static_cast<int>(std::floor(x_hi));
         ++xt) {
        os << "<line x1=\"" << px(xt) << "\" y1=\"" << H - mb << "\" x2=\"" << px(xt)
           << "\" y2=\"" << H - mb + 5 << "\" stroke=\"black\"/>\n"
           << "<text x=\"" << px(xt) << "\" y=\"" << H - mb + 20
           << "\" font-size=\"12\" text-anchor=\"middle\">" << xt << "</text>\n";
    }
    for (int yt = static_cast<int>(std::ceil(y_lo)); yt <= static_cast<int>(std::floor(y_hi));
         ++yt) {
        os << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(yt) << "\" x2=\"" << ml << "\" y2=\""
           << py(yt) << "\" stroke=\"black\"/>\n"
           << "<text x=\"" << ml - 8 << "\" y=\"" << py(yt) + 4
           << "\" font-size=\"12\" text-anchor=\"end\">" << yt << "</text>\n";
    }
    os << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
       << "\" font-size=\"13\" text-anchor=\"middle\">log2(dt)</text>\n"
       << "<text x=\"16\" y=\"" << (mt + H - mb) / 2
       << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << (mt + H - mb) / 2 << ")\">log2(error)</text>\n";

    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    int series = 0;
    for (const auto& [q_bar, fit] : fits) {
        const char* color = kColors[series % 4];
        os << "<line x1=\"" << px(x_lo + padx) << "\" y1=\""
           << py(fit.slope * (x_lo + padx) + fit.intercept) << "\" x2=\"" << px(x_hi - padx)
           << "\" y2=\"" << py(fit.slope * (x_hi - padx) + fit.intercept) << "\" stroke=\""
           << color << "\" stroke-dasharray=\"6 3\"/>\n";
        os << "<text x=\"" << W - mr - 10 << "\" y=\"" << mt + 18 + 18 * series
           << "\" font-size=\"13\" text-anchor=\"end\" fill=\"" << color << "\">q=" << q_bar
           << " slope " << fmt17(fit.slope).substr(0, 6) << "</text>\n";
        ++series;
    }
    series = 0;
    double prev_q = -1.0;
    for (const auto& r : table.rows) {
        if (r.q_bar != prev_q) {
            // Rows arrive grouped by level then q_bar; recover the series
            // index by matching the fit list.
            series = 0;
            for (std::size_t i = 0; i < fits.size(); ++i)
                if (fits[i].first == r.q_bar) series = static_cast<int>(i);
            prev_q = r.q_bar;
        }
        if (!(r.error > 0.0)) continue;
        os << "<circle cx=\"" << px(std::log2(r.dt)) << "\" cy=\"" << py(std::log2(r.error))
           << "\" r=\"4\" fill=\"" << kColors[series % 4] << "\" data-dt=\"" << fmt17(r.dt)
           << "\" data-qbar=\"" << fmt17(r.q_bar) << "\" data-error=\"" << fmt17(r.error)
           << "\"/>\n";
    }
    os << "</svg>\n";
}

}  // namespace sdde
