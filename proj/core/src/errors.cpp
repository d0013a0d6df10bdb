#include "sclq/errors.hpp"

namespace sclq {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NotPositive: return "NotPositive";
        case ErrorKind::BadGrid: return "BadGrid";
        case ErrorKind::NonFinite: return "NonFinite";
        case ErrorKind::Singular: return "Singular";
        case ErrorKind::NumericalFailure: return "NumericalFailure";
        case ErrorKind::TargetUnreachableFromManifold: return "TargetUnreachableFromManifold";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

UnreachableError::UnreachableError(double residual, double tolerance, const std::string& what)
    : Error(ErrorKind::TargetUnreachableFromManifold, what),
      residual_(residual),
      tolerance_(tolerance) {}

void raise(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace sclq
