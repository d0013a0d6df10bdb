#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sclq {

enum class ErrorKind {
    DimensionMismatch,
    NotPositive,
    BadGrid,
    NonFinite,
    Singular,
    NumericalFailure,
    TargetUnreachableFromManifold,
    InvalidConfig,
};

[[nodiscard]] std::string_view to_string(ErrorKind kind) noexcept;

/// Base exception for every failure raised by the library. The kind is
/// stable and is what callers (the CLI in particular) branch on.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised when the multiplier equation has no least-squares solution within
/// tolerance, i.e. the target cannot be reached from the initial manifold.
class UnreachableError : public Error {
public:
    UnreachableError(double residual, double tolerance, const std::string& what);

    [[nodiscard]] double residual() const noexcept { return residual_; }
    [[nodiscard]] double tolerance() const noexcept { return tolerance_; }

private:
    double residual_;
    double tolerance_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& what);

}  // namespace sclq
