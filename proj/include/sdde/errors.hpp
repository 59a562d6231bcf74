#pragma once

#include <stdexcept>
#include <string>

namespace sdde {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent run configuration (bad grid, bad policy
/// parameters, unparseable config file).
class config_error : public error {
public:
    explicit config_error(const std::string& what) : error(what) {}
};

/// Coefficient or expression evaluation failed (non-finite value,
/// domain error such as ln of a non-positive argument).
class eval_error : public error {
public:
    explicit eval_error(const std::string& what) : error(what) {}
};

/// Expression syntax error; carries the byte offset into the source text.
class parse_error : public error {
public:
    parse_error(const std::string& what, std::size_t offset)
        : error(what + " (at offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Implicit drift solve failed to converge; carries the last residual.
class solver_error : public error {
public:
    solver_error(const std::string& what, double last_residual)
        : error(what), residual_(last_residual) {}
    double last_residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// A requested coarse grid does not align with the master fine grid.
class alignment_error : public error {
public:
    explicit alignment_error(const std::string& what) : error(what) {}
};

/// An operation needs data the problem does not provide (e.g. second
/// partials for a derivative-growth probe).
class capability_error : public error {
public:
    explicit capability_error(const std::string& what) : error(what) {}
};

/// A Monte Carlo path failed; carries enough context to reproduce it.
class simulation_error : public error {
public:
    simulation_error(const std::string& what, std::uint64_t seed, std::uint64_t path_index)
        : error(what + " [seed=" + std::to_string(seed) +
                ", path=" + std::to_string(path_index) + "]"),
          seed_(seed), path_(path_index) {}
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t path_index() const noexcept { return path_; }

private:
    std::uint64_t seed_;
    std::uint64_t path_;
};

}  // namespace sdde
