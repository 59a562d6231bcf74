#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sdde/errors.hpp"
#include "sdde/expr.hpp"
#include "sdde/probe.hpp"
#include "sdde/problems.hpp"

namespace sdde {

// Line-based run configuration:
//
//   [problem]                 builtin = paper_example | gbm | linear_delay,
//                             or expression-defined: f/g/g1/g2/f1/f2/xi
//                             (quoted), tau, horizon, beta; fd_partials
//                             derives missing g partials approximately.
//   [policy]                  lambda_coeff, lambda_power (Lambda = c*w^m),
//                             alpha_exponent (alpha = dt^-e), k0,
//                             radius_override.
//   [scheme]                  theta, k1, newton_tol, newton_max_iter,
//                             method = milstein | em.
//   [study]                   levels, reference (step or "exact"), paths,
//                             qbars, seed, dt (for `simulate`), q2_refine.
//   [probe]                   one `case = KIND key=value ...` line per
//                             assumption case; lambda_ws, lambda_samples.
//
// Numbers accept plain decimals and power-of-two literals like 2^-9.

struct ProbePlan {
    std::vector<AssumptionCase> cases;
    std::vector<double> lambda_ws;
    long lambda_samples = 10000;
};

struct RunConfig {
    ProblemSpec spec;
    TruncationPolicy policy;
    SchemeConfig scheme;
    StudyPlan plan;
    ProbePlan probe;
    SchemeKind method = SchemeKind::ThetaMilstein;
    double simulate_dt = 0.0;   // step size for the `simulate` command
    long q2_refine = 64;        // fine sub-steps per step for standalone simulations
    std::string builtin_name;

    static RunConfig load_file(const std::string& path);
    static RunConfig parse_stream(std::istream& in, const std::string& origin);
};

namespace config_detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

[[noreturn]] inline void fail(const std::string& origin, int line, const std::string& what) {
    throw config_error(origin + ":" + std::to_string(line) + ": " + what);
}

/// Parses "2^-9", "0.25", "1e-3", "inf".
inline double parse_number(const std::string& raw, const std::string& origin, int line) {
    const std::string s = trim(raw);
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (const auto caret = s.find('^'); caret != std::string::npos) {
        try {
            const double base = std::stod(s.substr(0, caret));
            const double expo = std::stod(s.substr(caret + 1));
            return std::pow(base, expo);
        } catch (...) {
            fail(origin, line, "malformed power literal '" + s + "'");
        }
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) fail(origin, line, "malformed number '" + s + "'");
        return v;
    } catch (const config_error&) {
        throw;
    } catch (...) {
        fail(origin, line, "malformed number '" + s + "'");
    }
}

inline std::vector<double> parse_number_list(const std::string& raw, const std::string& origin,
                                             int line) {
    std::vector<double> out;
    std::istringstream ss(raw);
    std::string tok;
    while (ss >> tok) out.push_back(parse_number(tok, origin, line));
    return out;
}

inline std::string unquote(const std::string& raw, const std::string& origin, int line) {
    const std::string s = trim(raw);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    fail(origin, line, "expected a quoted expression, got '" + s + "'");
}

struct KeyValue {
    std::string value;
    int line;
    bool used = false;
};

/// key=value tokens of a probe case line; quoted values may contain
/// spaces and '='.
inline std::map<std::string, std::string> split_case_tokens(const std::string& body,
                                                            const std::string& origin,
                                                            int line) {
    std::map<std::string, std::string> kv;
    std::size_t i = 0;
    while (i < body.size()) {
        while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
        if (i >= body.size()) break;
        const std::size_t eq = body.find('=', i);
        if (eq == std::string::npos) fail(origin, line, "probe case: expected key=value");
        const std::string key = trim(body.substr(i, eq - i));
        std::size_t j = eq + 1;
        std::string value;
        if (j < body.size() && body[j] == '"') {
            const std::size_t close = body.find('"', j + 1);
            if (close == std::string::npos) fail(origin, line, "probe case: unterminated quote");
            value = body.substr(j, close - j + 1);
            j = close + 1;
        } else {
            const std::size_t end = body.find_first_of(" \t", j);
            value = body.substr(j, end == std::string::npos ? std::string::npos : end - j);
            j = (end == std::string::npos) ? body.size() : end;
        }
        if (key.empty()) fail(origin, line, "probe case: empty key");
        kv[key] = value;
        i = j;
    }
    return kv;
}

inline AssumptionKind parse_kind(const std::string& name, const std::string& origin, int line) {
    if (name == "A1" || name == "A1-polyLipschitz") return AssumptionKind::A1_PolyLipschitz;
    if (name == "A2" || name == "A2-monotoneU") return AssumptionKind::A2_MonotoneU;
    if (name == "A3" || name == "A3-khasminskii") return AssumptionKind::A3_Khasminskii;
    if (name == "A4" || name == "A4-timeHolder") return AssumptionKind::A4_TimeHolder;
    if (name == "A5" || name == "A5-initialHolder") return AssumptionKind::A5_InitialHolder;
    if (name == "A6" || name == "A6-derivGrowth") return AssumptionKind::A6_DerivGrowth;
    if (name == "A39" || name == "A39-monotone") return AssumptionKind::A39_Monotone;
    fail(origin, line, "unknown assumption kind '" + name + "'");
}

inline Interval parse_interval(const std::string& raw, const std::string& origin, int line) {
    const std::size_t colon = raw.find(':');
    if (colon == std::string::npos)
        fail(origin, line, "expected an interval lo:hi, got '" + raw + "'");
    Interval box;
    box.lo = parse_number(raw.substr(0, colon), origin, line);
    box.hi = parse_number(raw.substr(colon + 1), origin, line);
    if (!(box.lo <= box.hi)) fail(origin, line, "interval lo must not exceed hi");
    return box;
}

inline AssumptionCase parse_case(const std::string& body, const std::string& origin, int line) {
    std::istringstream head(body);
    std::string kind_name;
    head >> kind_name;
    AssumptionCase c;
    c.kind = parse_kind(kind_name, origin, line);
    const std::string rest = body.substr(std::min(body.size(), body.find(kind_name) +
                                                  kind_name.size()));
    for (const auto& [key, value] : split_case_tokens(rest, origin, line)) {
        if (key == "K") c.k_main = parse_number(value, origin, line);
        else if (key == "q") c.q = parse_number(value, origin, line);
        else if (key == "p") c.p = parse_number(value, origin, line);
        else if (key == "beta") c.beta = parse_number(value, origin, line);
        else if (key == "sigma") c.sigma = parse_number(value, origin, line);
        else if (key == "gamma") c.gamma = parse_number(value, origin, line);
        else if (key == "samples") c.samples = static_cast<long>(parse_number(value, origin, line));
        else if (key == "fd") c.allow_finite_difference = parse_number(value, origin, line) != 0.0;
        else if (key == "t") c.t_box = parse_interval(value, origin, line);
        else if (key == "x") c.x_box = parse_interval(value, origin, line);
        else if (key == "y") c.y_box = parse_interval(value, origin, line);
        else if (key == "u") {
            static const std::vector<std::string> kUV = {"m", "n"};
            c.u = Expr::parse(unquote(value, origin, line), kUV);
        } else {
            fail(origin, line, "probe case: unknown key '" + key + "'");
        }
    }
    return c;
}

}  // namespace config_detail

inline RunConfig RunConfig::parse_stream(std::istream& in, const std::string& origin) {
    using namespace config_detail;

    std::map<std::string, std::map<std::string, KeyValue>> sections;
    std::vector<std::pair<std::string, int>> case_lines;
    std::string section;
    std::string line_text;
    int line_no = 0;
    while (std::getline(in, line_text)) {
        ++line_no;
        std::string line = line_text;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            // '#' inside a quoted expression is part of the expression.
            bool in_quote = false;
            std::size_t cut = std::string::npos;
            for (std::size_t i = 0; i < line.size(); ++i) {
                if (line[i] == '"') in_quote = !in_quote;
                else if (line[i] == '#' && !in_quote) { cut = i; break; }
            }
            if (cut != std::string::npos) line = line.substr(0, cut);
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, line_no, "malformed section header");
            section = line.substr(1, line.size() - 2);
            if (section != "problem" && section != "policy" && section != "scheme" &&
                section != "study" && section != "probe")
                fail(origin, line_no, "unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(origin, line_no, "expected key = value");
        if (section.empty()) fail(origin, line_no, "key outside of any section");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "case" && section == "probe") {
            case_lines.emplace_back(value, line_no);
            continue;
        }
        sections[section][key] = KeyValue{value, line_no};
    }

    const auto take = [&](const std::string& sec,
                          const std::string& key) -> std::optional<KeyValue*> {
        auto s = sections.find(sec);
        if (s == sections.end()) return std::nullopt;
        auto k = s->second.find(key);
        if (k == s->second.end()) return std::nullopt;
        k->second.used = true;
        return &k->second;
    };
    const auto num = [&](const std::string& sec, const std::string& key,
                         double fallback) -> double {
        auto kv = take(sec, key);
        return kv ? parse_number((*kv)->value, origin, (*kv)->line) : fallback;
    };

    RunConfig rc;

    // [problem]: builtin first, explicit keys override.
    BuiltinProblem base;
    bool have_base = false;
    if (auto kv = take("problem", "builtin")) {
        rc.builtin_name = trim((*kv)->value);
        if (rc.builtin_name == "paper_example") {
            base = paper_example();
        } else if (rc.builtin_name == "gbm") {
            base = gbm(num("problem", "mu", 0.05), num("problem", "sigma", 0.2),
                       num("problem", "x0", 1.0));
        } else if (rc.builtin_name == "linear_delay") {
            base = linear_delay(num("problem", "a", -2.0), num("problem", "b", 0.5),
                                num("problem", "c", 0.3), num("problem", "d", 0.2));
        } else {
            fail(origin, (*kv)->line, "unknown builtin '" + rc.builtin_name + "'");
        }
        have_base = true;
        rc.spec = base.spec;
        rc.policy = base.policy;
        rc.scheme = base.scheme;
        rc.plan = base.plan;
    }

    rc.spec.delay = num("problem", "tau", rc.spec.delay);
    rc.spec.horizon = num("problem", "T", num("problem", "horizon", rc.spec.horizon));
    rc.spec.growth_beta = num("problem", "beta", rc.spec.growth_beta);
    const bool fd_partials = num("problem", "fd_partials", 0.0) != 0.0;

    const auto expr_coeff = [&](const std::string& key) -> std::optional<CoeffFn> {
        auto kv = take("problem", key);
        if (!kv) return std::nullopt;
        Expr e = Expr::parse(unquote((*kv)->value, origin, (*kv)->line));
        return CoeffFn([e](double t, double x, double y) { return e.eval(t, x, y); });
    };
    if (auto f = expr_coeff("f")) rc.spec.drift = *f;
    if (auto g = expr_coeff("g")) rc.spec.diffusion = *g;
    if (auto g1 = expr_coeff("g1")) rc.spec.diffusion_dx = *g1;
    if (auto g2 = expr_coeff("g2")) rc.spec.diffusion_dy = *g2;
    if (auto f1 = expr_coeff("f1")) rc.spec.drift_dx = *f1;
    if (auto f2 = expr_coeff("f2")) rc.spec.drift_dy = *f2;
    if (auto kv = take("problem", "xi")) {
        static const std::vector<std::string> kTOnly = {"t"};
        Expr e = Expr::parse(unquote((*kv)->value, origin, (*kv)->line), kTOnly);
        rc.spec.initial_segment = [e](double t) {
            const double v[1] = {t};
            return e.eval(std::span<const double>(v, 1));
        };
    }
    if (fd_partials && rc.spec.diffusion) {
        if (!rc.spec.diffusion_dx)
            rc.spec.diffusion_dx = finite_difference_partial(rc.spec.diffusion, 1);
        if (!rc.spec.diffusion_dy)
            rc.spec.diffusion_dy = finite_difference_partial(rc.spec.diffusion, 2);
    }
    if (!rc.spec.drift)
        throw config_error(origin + ": [problem] needs a builtin or a drift expression f");
    if (!rc.spec.diffusion_dx || !rc.spec.diffusion_dy)
        throw config_error(origin +
                           ": [problem] needs g1 and g2 (or fd_partials = 1 to approximate)");

    // [policy]
    if (sections.count("policy")) {
        const double coeff = num("policy", "lambda_coeff", 0.0);
        const double power = num("policy", "lambda_power", 0.0);
        if ((coeff > 0.0) != (power > 0.0))
            throw config_error(origin + ": [policy] lambda_coeff and lambda_power go together");
        if (coeff > 0.0) {
            rc.policy.lambda = [coeff, power](double w) { return coeff * std::pow(w, power); };
            rc.policy.lambda_inv = [coeff, power](double u) {
                return std::pow(u / coeff, 1.0 / power);
            };
            rc.policy.k0 = std::max(1.0, coeff);
        }
        if (auto kv = take("policy", "alpha_exponent")) {
            const double e = parse_number((*kv)->value, origin, (*kv)->line);
            if (!(e > 0.0)) fail(origin, (*kv)->line, "alpha_exponent must be > 0");
            rc.policy.alpha = [e](double dt) { return std::pow(dt, -e); };
        }
        rc.policy.k0 = num("policy", "k0", rc.policy.k0);
        if (auto kv = take("policy", "radius_override"))
            rc.policy.radius_override = parse_number((*kv)->value, origin, (*kv)->line);
    }
    if (!rc.policy.alpha && !rc.policy.radius_override)
        throw config_error(origin + ": [policy] is required for non-builtin problems");

    // [scheme]
    rc.scheme.theta = num("scheme", "theta", rc.scheme.theta);
    rc.scheme.k1_bound = num("scheme", "k1", rc.scheme.k1_bound);
    const double tol = num("scheme", "newton_tol", rc.scheme.newton_tol_abs);
    rc.scheme.newton_tol_abs = tol;
    rc.scheme.newton_tol_rel = tol;
    rc.scheme.newton_max_iter =
        static_cast<int>(num("scheme", "newton_max_iter", rc.scheme.newton_max_iter));
    if (auto kv = take("scheme", "method")) {
        const std::string m = trim((*kv)->value);
        if (m == "milstein") rc.method = SchemeKind::ThetaMilstein;
        else if (m == "em") rc.method = SchemeKind::TruncatedEM;
        else fail(origin, (*kv)->line, "method must be milstein or em");
    }

    // [study]
    if (auto kv = take("study", "levels"))
        rc.plan.levels = parse_number_list((*kv)->value, origin, (*kv)->line);
    if (auto kv = take("study", "reference")) {
        const std::string v = trim((*kv)->value);
        if (v == "exact") {
            if (!have_base || !base.exact_terminal)
                fail(origin, (*kv)->line, "reference = exact needs a builtin with a "
                                          "closed-form solution (gbm)");
            rc.plan.exact_terminal = base.exact_terminal;
            rc.plan.reference_dt = 0.0;
        } else {
            rc.plan.reference_dt = parse_number(v, origin, (*kv)->line);
            rc.plan.exact_terminal = nullptr;
        }
    }
    rc.plan.num_paths = static_cast<int>(num("study", "paths", rc.plan.num_paths));
    if (auto kv = take("study", "qbars"))
        rc.plan.q_bars = parse_number_list((*kv)->value, origin, (*kv)->line);
    rc.plan.seed = static_cast<std::uint64_t>(num("study", "seed", static_cast<double>(rc.plan.seed)));
    rc.simulate_dt = num("study", "dt", rc.simulate_dt);
    rc.q2_refine = static_cast<long>(num("study", "q2_refine", static_cast<double>(rc.q2_refine)));

    // [probe]
    for (const auto& [body, ln] : case_lines) rc.probe.cases.push_back(parse_case(body, origin, ln));
    if (auto kv = take("probe", "lambda_ws"))
        rc.probe.lambda_ws = parse_number_list((*kv)->value, origin, (*kv)->line);
    rc.probe.lambda_samples =
        static_cast<long>(num("probe", "lambda_samples", static_cast<double>(rc.probe.lambda_samples)));

    // Reject unknown keys so typos fail loudly.
    for (const auto& [sec, kvs] : sections)
        for (const auto& [key, kv] : kvs)
            if (!kv.used)
                fail(origin, kv.line, "unknown key '" + key + "' in section [" + sec + "]");

    rc.spec.validate();
    return rc;
}

inline RunConfig RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    return parse_stream(in, path);
}

}  // namespace sdde
