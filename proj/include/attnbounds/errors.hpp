#pragma once

#include <stdexcept>
#include <string>

namespace attnbounds {

// Common base so callers can catch everything from this library at once.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dimension mismatch between operands.
struct ShapeError : Error {
    using Error::Error;
};

// A row whose normalizer is zero (or nonpositive where positivity is required).
struct DegenerateRowError : Error {
    using Error::Error;
};

// Non-finite values or raw-float overflow where a finite result is required.
struct NumericError : Error {
    using Error::Error;
};

// Operation applied to a ProblemInstance of the wrong kind.
struct KindError : Error {
    using Error::Error;
};

// Unsupported (mechanism, mode) combination or invalid variant parameters.
struct VariantError : Error {
    using Error::Error;
};

// Approximation budget mu outside the admissible range for the variant.
struct BoundError : Error {
    using Error::Error;
};

// Instance generation exhausted its retry budget.
struct GenerationError : Error {
    using Error::Error;
};

// Invalid configuration: missing window, bad arity, out-of-range parameter.
struct ConfigError : Error {
    using Error::Error;
};

// Work or memory would exceed a configured budget (e.g. feature-map blowup).
struct ResourceError : Error {
    using Error::Error;
};

// A build-time structural assertion failed (coverage, separation, cost).
struct ConstructionError : Error {
    using Error::Error;
};

} // namespace attnbounds
