#pragma once

#include <stdexcept>
#include <string>

namespace pdeop {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad parameters, mismatched domains, unknown keys.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Shapes of vectors/matrices do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A numerical routine produced a non-finite value or a singular factorization.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Caller broke a documented precondition (e.g. negative violation measure).
class ContractError : public Error {
public:
    using Error::Error;
};

/// An iterative solver failed to converge.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double last_residual)
        : Error(what), last_residual_(last_residual) {}

    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

}  // namespace pdeop
