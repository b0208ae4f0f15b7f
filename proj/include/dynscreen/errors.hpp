#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dynscreen {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed case file or JSON document. `line()` is 0 when not applicable.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Disconnected or edgeless network.
class TopologyError : public Error {
public:
    using Error::Error;
};

/// Branch or selector referring to a bus/branch that does not exist.
class ReferenceError : public Error {
public:
    using Error::Error;
};

/// Injections that do not sum to zero within tolerance.
class BalanceError : public Error {
public:
    using Error::Error;
};

/// Precondition violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Eigendecomposition failed its reconstruction check.
class DefectiveMatrixError : public Error {
public:
    DefectiveMatrixError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Cross-entropy update left with no elite samples.
class DegenerateEliteError : public Error {
public:
    using Error::Error;
};

}  // namespace dynscreen
