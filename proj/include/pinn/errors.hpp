#pragma once

#include <stdexcept>
#include <string>

namespace pinn {

/// Misuse of an API contract: shape mismatch, foreign-tape variable, bad spec.
struct StructuralError : std::runtime_error {
  explicit StructuralError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input outside the mathematical domain of an operation.
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Requested feature is deliberately not supported.
struct UnsupportedError : std::runtime_error {
  explicit UnsupportedError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric failure detected at runtime (NaN/Inf propagation, blowup, sampling failure).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// The boundary normal is not unique at the queried point.
struct AmbiguousNormalError : DomainError {
  explicit AmbiguousNormalError(const std::string& msg) : DomainError(msg) {}
};

/// Rejection sampling exhausted its retry budget.
struct SamplingError : std::runtime_error {
  explicit SamplingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pinn
