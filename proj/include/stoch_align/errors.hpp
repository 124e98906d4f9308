#pragma once

#include <stdexcept>
#include <string>

namespace stoch_align {

/// Invalid problem instance or run configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Structured matrix that cannot be inverted. The message names the
/// precondition that failed.
class SingularMatrixError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A numerical routine could not complete (e.g. singular innovation covariance).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace stoch_align
