#pragma once

#include <stdexcept>
#include <string>

namespace mlpmcmc {

enum class ErrorKind {
    Domain,
    LevelUnderflow,
    DegenerateVariance,
    DegenerateWeights,
    FilterCollapse,
    InsufficientData,
    Config,
    Schema,
    Io,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library. The message is prefixed with
/// "module::operation" so the CLI can surface where it happened.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string module, std::string op, const std::string& detail)
        : std::runtime_error(module + "::" + op + ": " + detail),
          kind_(kind),
          module_(std::move(module)),
          op_(std::move(op)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& module() const noexcept { return module_; }
    const std::string& op() const noexcept { return op_; }

private:
    ErrorKind kind_;
    std::string module_;
    std::string op_;
};

/// Raised by the particle filters when every weight at some time is zero
/// or non-finite.
class FilterCollapse : public Error {
public:
    FilterCollapse(std::string op, int t)
        : Error(ErrorKind::FilterCollapse, "filters", std::move(op),
                "all particle weights degenerate at t=" + std::to_string(t)),
          t_(t) {}

    int time() const noexcept { return t_; }

private:
    int t_;
};

}  // namespace mlpmcmc
