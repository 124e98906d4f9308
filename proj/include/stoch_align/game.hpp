#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stoch_align/config.hpp"
#include "stoch_align/kalman.hpp"

namespace stoch_align {

/// Optimal per-round coefficient on Y_i for one agent, given that every other
/// agent runs W(rho_opp(t)).
struct BestResponseSchedule {
    std::vector<double> responsiveness;
    std::vector<double> p_pre;  ///< prior variance of the agent's own stretch
};

/// Best response over rounds 0..t_max. The deviating agent's optimal move
/// keeps its own scalar filter estimate at zero, which gives
///   coeff(t) = (1 - rho_opp(t)/(n-1)) * P_t / (P_t + sigma_m^2).
inline BestResponseSchedule best_response(std::span<const double> opp_schedule,
                                          const ModelConfig& cfg, int t_max) {
    cfg.validate();
    if (t_max < 0) {
        throw std::invalid_argument("best_response: t_max must be >= 0");
    }
    if (opp_schedule.size() < static_cast<std::size_t>(t_max) + 1) {
        throw std::invalid_argument("best_response: opponent schedule covers " +
                                    std::to_string(opp_schedule.size()) + " rounds, need " +
                                    std::to_string(t_max + 1));
    }
    const double inv = 1.0 / static_cast<double>(cfg.n - 1);
    BestResponseSchedule out;
    out.responsiveness.reserve(static_cast<std::size_t>(t_max) + 1);
    out.p_pre.reserve(static_cast<std::size_t>(t_max) + 1);
    double p = alpha_initial(cfg);
    for (int t = 0; t <= t_max; ++t) {
        const double rho = opp_schedule[static_cast<std::size_t>(t)];
        const auto s = scalar_filter_step(p, rho, cfg);
        out.p_pre.push_back(p);
        out.responsiveness.push_back((1.0 - rho * inv) * s.gain);
        p = s.p_next;
    }
    return out;
}

/// max_t |best_response(schedule)(t) - schedule(t)| over rounds 0..t_max.
/// Zero exactly when the symmetric profile W(schedule) is a fixed point.
inline double nash_residual(std::span<const double> schedule, const ModelConfig& cfg, int t_max) {
    const auto br = best_response(schedule, cfg, t_max);
    double worst = 0.0;
    for (int t = 0; t <= t_max; ++t) {
        const auto i = static_cast<std::size_t>(t);
        worst = std::max(worst, std::abs(br.responsiveness[i] - schedule[i]));
    }
    return worst;
}

}  // namespace stoch_align
