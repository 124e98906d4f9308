#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "stoch_align/config.hpp"
#include "stoch_align/kalman.hpp"

namespace stoch_align {

/// Limiting behavior of W(rho) when every agent runs it.
struct SteadyStatePrediction {
    double var_limit;   ///< lim Var(stretch); +inf when the process does not settle
    double rho;
    double cost_limit;  ///< lim E|stretch| = sqrt(2 var / pi)
};

/// lim_t Var(stretch) under W(rho):
///   r (rho^2 sm^2 + sd^2) / (1 - (1 - r rho)^2),  r = n/(n-1)
/// Returns +inf when the denominator vanishes (rho = 0, or n = 2 and rho = 1).
inline double var_limit(double rho, const ModelConfig& cfg) {
    if (!(rho >= 0.0 && rho <= 1.0)) {
        throw std::invalid_argument("var_limit: rho must lie in [0, 1]");
    }
    const double r = cfg.ratio();
    const double contraction = 1.0 - r * rho;
    const double denom = 1.0 - contraction * contraction;
    if (denom == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    const double noise = r * (rho * rho * cfg.sigma_m * cfg.sigma_m + cfg.sigma_d * cfg.sigma_d);
    return noise / denom;
}

/// One step of the exact per-round variance recursion under W(rho).
inline double var_next(double var, double rho, const ModelConfig& cfg) {
    const double r = cfg.ratio();
    const double c = 1.0 - r * rho;
    return c * c * var + r * (rho * rho * cfg.sigma_m * cfg.sigma_m + cfg.sigma_d * cfg.sigma_d);
}

/// Variance of the stretch at round 0: each agent's stretch is a linear
/// combination of n iid N(0, sigma0^2) positions, giving r sigma0^2.
inline double var_initial(const ModelConfig& cfg) {
    return cfg.ratio() * cfg.sigma0 * cfg.sigma0;
}

/// Best constant responsiveness.
inline double rho_star_const(const ModelConfig& cfg) {
    const double r = cfg.ratio();
    const double sm2 = cfg.sigma_m * cfg.sigma_m;
    const double sd = cfg.sigma_d;
    const double root = sd * std::sqrt(4.0 * sm2 + (r * sd) * (r * sd));
    return (root - r * sd * sd) / (2.0 * sm2);
}

/// Large-n approximation of the best constant responsiveness.
inline double rho_star_large_n(double sigma_m, double sigma_d) {
    const double sm2 = sigma_m * sigma_m;
    return (sigma_d * std::sqrt(4.0 * sm2 + sigma_d * sigma_d) - sigma_d * sigma_d) / (2.0 * sm2);
}

/// Large-n minimal limiting variance: sd (sqrt(4 sm^2 + sd^2) + sd) / 2.
inline double var_star_large_n(double sigma_m, double sigma_d) {
    return 0.5 * sigma_d * (std::sqrt(4.0 * sigma_m * sigma_m + sigma_d * sigma_d) + sigma_d);
}

/// Fixed point of the alpha recursion.
inline double alpha_infty(const ModelConfig& cfg) {
    const double r = cfg.ratio();
    const double sd = cfg.sigma_d;
    return 0.5 * (sd * std::sqrt(4.0 * cfg.sigma_m * cfg.sigma_m + (r * sd) * (r * sd)) +
                  r * sd * sd);
}

/// Geometric contraction factor of the alpha recursion toward alpha_infty:
/// a / (a + alpha_infty) with a = ((n-1)/n) sigma_m^2.
inline double alpha_contraction(const ModelConfig& cfg) {
    const double a = cfg.sigma_m * cfg.sigma_m / cfg.ratio();
    return a / (a + alpha_infty(cfg));
}

/// Mean absolute value of N(0, v): sqrt(2 v / pi).
inline double cost_from_variance(double v) {
    if (v < 0.0) {
        throw std::invalid_argument("cost_from_variance: variance must be >= 0");
    }
    return std::sqrt(2.0 * v / std::numbers::pi);
}

inline SteadyStatePrediction predict_steady_state(double rho, const ModelConfig& cfg) {
    const double v = var_limit(rho, cfg);
    return {v, rho, std::isfinite(v) ? cost_from_variance(v) : v};
}

}  // namespace stoch_align
