#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdde/errors.hpp"

namespace sdde {

// Arithmetic expressions for config-defined coefficients. Grammar:
// literals, variables (t, x, y by default), + - * / ^ with the usual
// precedence (^ binds tightest and associates right, then unary minus,
// then * /, then + -), parentheses, and a fixed function table:
// abs, sqrt, sin, cos, exp, ln (unary), pow, min, max (binary).
class Expr {
public:
    /// Parses with the default variable set {t, x, y}.
    static Expr parse(std::string_view src) {
        static const std::vector<std::string> kDefault = {"t", "x", "y"};
        return parse(src, kDefault);
    }

    /// Parses with a caller-chosen variable list (e.g. {m, n} for the
    /// monotonicity coupling functional). Evaluation is positional.
    static Expr parse(std::string_view src, std::span<const std::string> variables);

    /// Evaluates with the default {t, x, y} layout.
    double eval(double t, double x, double y) const {
        const double vals[3] = {t, x, y};
        return eval(std::span<const double>(vals, 3));
    }

    double eval(std::span<const double> values) const;

    /// Canonical fully parenthesized form; parse(str()) reproduces the
    /// same tree.
    std::string str() const;

    std::span<const std::string> variables() const { return vars_; }

private:
    enum class Kind { Literal, Variable, Unary, Binary, Call };

    struct Node {
        Kind kind;
        double literal = 0.0;
        int var_index = 0;
        char op = 0;
        int fn = 0;  // index into the function table
        std::vector<std::shared_ptr<const Node>> args;
        std::size_t begin = 0, end = 0;  // source span
    };
    using NodePtr = std::shared_ptr<const Node>;

    struct Fn {
        const char* name;
        int arity;
    };
    static constexpr Fn kFns[] = {
        {"abs", 1}, {"sqrt", 1}, {"sin", 1}, {"cos", 1}, {"exp", 1},
        {"ln", 1},  {"pow", 2},  {"min", 2}, {"max", 2},
    };

    class Parser;

    static double eval_node(const Node& n, std::span<const double> values);
    static void print_node(const Node& n, const std::vector<std::string>& vars,
                           std::string& out);
    static double checked_pow(double base, double expo, const Node& site);

    [[noreturn]] static void domain_fail(const Node& site, const std::string& what) {
        throw eval_error(what + " in sub-expression at offsets [" +
                         std::to_string(site.begin) + ", " + std::to_string(site.end) + ")");
    }

    NodePtr root_;
    std::vector<std::string> vars_;
};

class Expr::Parser {
public:
    Parser(std::string_view src, std::span<const std::string> vars)
        : src_(src), vars_(vars) {}

    NodePtr run() {
        NodePtr e = expression(0);
        skip_ws();
        if (pos_ != src_.size())
            throw parse_error("unexpected trailing input", pos_);
        return e;
    }

private:
    // Binding powers: + - (10), * / (20), unary - (30), ^ (40, right).
    static int lbp(char op) {
        switch (op) {
            case '+': case '-': return 10;
            case '*': case '/': return 20;
            case '^': return 40;
            default: return 0;
        }
    }

    NodePtr expression(int min_bp) {
        NodePtr left = prefix();
        for (;;) {
            skip_ws();
            if (pos_ >= src_.size()) break;
            const char op = src_[pos_];
            const int bp = lbp(op);
            if (bp == 0 || bp <= min_bp) break;
            ++pos_;
            // '^' associates right: its right operand is parsed at bp-1
            // so another '^' still binds.
            NodePtr right = expression(op == '^' ? bp - 1 : bp);
            auto n = std::make_shared<Node>();
            n->kind = Kind::Binary;
            n->op = op;
            n->args = {left, right};
            n->begin = left->begin;
            n->end = right->end;
            left = std::move(n);
        }
        return left;
    }

    NodePtr prefix() {
        skip_ws();
        if (pos_ >= src_.size()) throw parse_error("expected an expression", pos_);
        const std::size_t start = pos_;
        const char c = src_[pos_];
        if (c == '-') {
            ++pos_;
            NodePtr operand = expression(30);
            auto n = std::make_shared<Node>();
            n->kind = Kind::Unary;
            n->op = '-';
            n->args = {operand};
            n->begin = start;
            n->end = operand->end;
            return n;
        }
        if (c == '(') {
            ++pos_;
            NodePtr inner = expression(0);
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        throw parse_error(std::string("expected a number, variable, function or '(' before '") +
                          c + "'", pos_);
    }

    NodePtr number() {
        const std::size_t start = pos_;
        const std::string text(src_.substr(start));
        char* endp = nullptr;
        const double v = std::strtod(text.c_str(), &endp);
        const std::size_t used = static_cast<std::size_t>(endp - text.c_str());
        if (used == 0) throw parse_error("malformed number", start);
        pos_ = start + used;
        auto n = std::make_shared<Node>();
        n->kind = Kind::Literal;
        n->literal = v;
        n->begin = start;
        n->end = pos_;
        return n;
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string_view name = src_.substr(start, pos_ - start);

        for (std::size_t i = 0; i < std::size(kFns); ++i) {
            if (name == kFns[i].name) {
                skip_ws();
                expect('(');
                auto n = std::make_shared<Node>();
                n->kind = Kind::Call;
                n->fn = static_cast<int>(i);
                n->begin = start;
                n->args.push_back(expression(0));
                for (int a = 1; a < kFns[i].arity; ++a) {
                    expect(',');
                    n->args.push_back(expression(0));
                }
                expect(')');
                n->end = pos_;
                return n;
            }
        }
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            if (name == vars_[i]) {
                auto n = std::make_shared<Node>();
                n->kind = Kind::Variable;
                n->var_index = static_cast<int>(i);
                n->begin = start;
                n->end = pos_;
                return n;
            }
        }
        throw parse_error("unknown identifier '" + std::string(name) + "'", start);
    }

    void expect(char c) {
        skip_ws();
        if (pos_ >= src_.size() || src_[pos_] != c)
            throw parse_error(std::string("expected '") + c + "'", pos_);
        ++pos_;
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
    }

    std::string_view src_;
    std::span<const std::string> vars_;
    std::size_t pos_ = 0;
};

inline Expr Expr::parse(std::string_view src, std::span<const std::string> variables) {
    Expr e;
    e.vars_.assign(variables.begin(), variables.end());
    e.root_ = Parser(src, e.vars_).run();
    return e;
}

inline double Expr::checked_pow(double base, double expo, const Node& site) {
    if (base > 0.0) return std::pow(base, expo);
    if (base == 0.0) {
        if (expo > 0.0) return 0.0;
        if (expo == 0.0) return 1.0;
        domain_fail(site, "0 raised to a negative power");
    }
    // Negative base: only integral exponents have a real value.
    if (std::nearbyint(expo) == expo && std::abs(expo) < 9.007199254740992e15)
        return std::pow(base, expo);
    domain_fail(site, "negative base raised to a non-integral power");
}

inline double Expr::eval_node(const Node& n, std::span<const double> values) {
    switch (n.kind) {
        case Kind::Literal: return n.literal;
        case Kind::Variable: return values[static_cast<std::size_t>(n.var_index)];
        case Kind::Unary: return -eval_node(*n.args[0], values);
        case Kind::Binary: {
            const double a = eval_node(*n.args[0], values);
            const double b = eval_node(*n.args[1], values);
            double r;
            switch (n.op) {
                case '+': r = a + b; break;
                case '-': r = a - b; break;
                case '*': r = a * b; break;
                case '/': r = a / b; break;
                default: r = checked_pow(a, b, n); break;
            }
            if (!std::isfinite(r)) domain_fail(n, "non-finite result");
            return r;
        }
        case Kind::Call: {
            const double a = eval_node(*n.args[0], values);
            double r;
            switch (n.fn) {
                case 0: r = std::abs(a); break;
                case 1:
                    if (a < 0.0) domain_fail(n, "sqrt of a negative value");
                    r = std::sqrt(a);
                    break;
                case 2: r = std::sin(a); break;
                case 3: r = std::cos(a); break;
                case 4: r = std::exp(a); break;
                case 5:
                    if (!(a > 0.0)) domain_fail(n, "ln of a non-positive value");
                    r = std::log(a);
                    break;
                case 6: r = checked_pow(a, eval_node(*n.args[1], values), n); break;
                case 7: r = std::min(a, eval_node(*n.args[1], values)); break;
                default: r = std::max(a, eval_node(*n.args[1], values)); break;
            }
            if (!std::isfinite(r)) domain_fail(n, "non-finite result");
            return r;
        }
    }
    domain_fail(n, "corrupt expression tree");
}

inline double Expr::eval(std::span<const double> values) const {
    if (values.size() < vars_.size())
        throw eval_error("Expr::eval: not enough variable values");
    return eval_node(*root_, values);
}

inline void Expr::print_node(const Node& n, const std::vector<std::string>& vars,
                             std::string& out) {
    switch (n.kind) {
        case Kind::Literal: {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.17g", n.literal);
            out += buf;
            return;
        }
        case Kind::Variable:
            out += vars[static_cast<std::size_t>(n.var_index)];
            return;
        case Kind::Unary:
            out += "(-";
            print_node(*n.args[0], vars, out);
            out += ')';
            return;
        case Kind::Binary:
            out += '(';
            print_node(*n.args[0], vars, out);
            out += ' ';
            out += n.op;
            out += ' ';
            print_node(*n.args[1], vars, out);
            out += ')';
            return;
        case Kind::Call:
            out += kFns[n.fn].name;
            out += '(';
            for (std::size_t i = 0; i < n.args.size(); ++i) {
                if (i) out += ", ";
                print_node(*n.args[i], vars, out);
            }
            out += ')';
            return;
    }
}

inline std::string Expr::str() const {
    std::string out;
    print_node(*root_, vars_, out);
    return out;
}

}  // namespace sdde
