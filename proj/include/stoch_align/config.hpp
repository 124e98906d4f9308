#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "stoch_align/errors.hpp"

namespace stoch_align {

/// One instance of the alignment problem.
///
/// sigma0 may be zero (all agents start at the origin). sigma_m and sigma_d
/// must be strictly positive.
struct ModelConfig {
    int n = 3;
    double sigma0 = 1.0;
    double sigma_m = 1.0;
    double sigma_d = 1.0;
    int horizon = 100;
    std::uint64_t seed = 1;

    /// n / (n - 1), the factor that shows up in nearly every closed form.
    double ratio() const { return static_cast<double>(n) / static_cast<double>(n - 1); }

    void validate() const {
        if (n < 2) {
            throw ConfigError("n must be >= 2 (got " + std::to_string(n) + ")");
        }
        if (!(sigma0 >= 0.0) || !std::isfinite(sigma0)) {
            throw ConfigError("sigma0 must be finite and >= 0");
        }
        if (!(sigma_m > 0.0) || !std::isfinite(sigma_m)) {
            throw ConfigError("sigma_m must be finite and > 0");
        }
        if (!(sigma_d > 0.0) || !std::isfinite(sigma_d)) {
            throw ConfigError("sigma_d must be finite and > 0");
        }
        if (horizon < 0) {
            throw ConfigError("horizon must be >= 0");
        }
    }
};

}  // namespace stoch_align
