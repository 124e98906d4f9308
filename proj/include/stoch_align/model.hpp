#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stoch_align/config.hpp"
#include "stoch_align/errors.hpp"
#include "stoch_align/rng.hpp"

namespace stoch_align {

/// Positions of all agents at the start of a round.
struct WorldState {
    int round = 0;
    std::vector<double> positions;

    std::size_t size() const { return positions.size(); }
};

/// Per-agent noisy stretch observations for one round.
struct MeasurementVector {
    std::vector<double> values;
};

/// Per-agent moves chosen for one round.
struct MoveVector {
    std::vector<double> values;
};

namespace detail {

inline void require_same_length(std::size_t expected, std::size_t got, const char* what) {
    if (expected != got) {
        throw ConfigError(std::string(what) + ": expected length " + std::to_string(expected) +
                          ", got " + std::to_string(got));
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Span kernels. These are what the Monte Carlo engine calls in its inner loop;
// the value-returning wrappers below are thin layers on top of them.
// ---------------------------------------------------------------------------

/// out[i] = mean of the other agents' positions minus positions[i].
inline void stretch_into(std::span<const double> positions, std::span<double> out) {
    const std::size_t n = positions.size();
    const double total = std::accumulate(positions.begin(), positions.end(), 0.0);
    const double inv = 1.0 / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = (total - positions[i]) * inv - positions[i];
    }
}

/// Fill `out` with independent N(0, sd^2) draws, in index order.
inline void draw_noise_into(RngStream& rng, double sd, std::span<double> out) {
    for (auto& v : out) {
        v = rng.gaussian(sd);
    }
}

/// Mean position, i.e. the center of mass.
inline double center_of_mass(std::span<const double> positions) {
    return std::accumulate(positions.begin(), positions.end(), 0.0) /
           static_cast<double>(positions.size());
}

// ---------------------------------------------------------------------------
// Value API
// ---------------------------------------------------------------------------

/// Round-0 world: every position drawn from N(0, sigma0^2).
inline WorldState init_world(const ModelConfig& cfg, RngStream& rng) {
    cfg.validate();
    WorldState w;
    w.round = 0;
    w.positions.resize(static_cast<std::size_t>(cfg.n));
    draw_noise_into(rng, cfg.sigma0, w.positions);
    return w;
}

inline std::vector<double> stretch(const WorldState& w) {
    if (w.size() < 2) {
        throw ConfigError("stretch needs at least two agents");
    }
    std::vector<double> out(w.size());
    stretch_into(w.positions, out);
    return out;
}

inline std::vector<double> draw_noise(RngStream& rng, std::size_t n, double sd) {
    std::vector<double> out(n);
    draw_noise_into(rng, sd, out);
    return out;
}

/// Measurement with an explicit noise realization.
inline MeasurementVector measure(const WorldState& w, std::span<const double> noise) {
    detail::require_same_length(w.size(), noise.size(), "measure");
    MeasurementVector y{stretch(w)};
    for (std::size_t i = 0; i < y.values.size(); ++i) {
        y.values[i] += noise[i];
    }
    return y;
}

/// Y_i = stretch_i + N(0, sigma_m^2), one draw per agent in index order.
inline MeasurementVector measure(const WorldState& w, const ModelConfig& cfg, RngStream& rng) {
    const auto noise = draw_noise(rng, w.size(), cfg.sigma_m);
    return measure(w, noise);
}

/// Advance positions by moves and an explicit drift realization.
inline WorldState step(const WorldState& w, const MoveVector& moves, std::span<const double> drift) {
    detail::require_same_length(w.size(), moves.values.size(), "step (moves)");
    detail::require_same_length(w.size(), drift.size(), "step (drift)");
    WorldState next{w.round + 1, w.positions};
    for (std::size_t i = 0; i < next.positions.size(); ++i) {
        next.positions[i] += moves.values[i] + drift[i];
    }
    return next;
}

/// theta_i <- theta_i + move_i + N(0, sigma_d^2); round advances by one.
inline WorldState step(const WorldState& w, const MoveVector& moves, const ModelConfig& cfg,
                       RngStream& rng) {
    detail::require_same_length(w.size(), moves.values.size(), "step (moves)");
    const auto drift = draw_noise(rng, w.size(), cfg.sigma_d);
    return step(w, moves, drift);
}

/// Next-round stretches computed directly from current stretches, moves and
/// drift, without going through positions:
///   s'_i = s_i - m_i - d_i + (1/(n-1)) * sum_{j != i} (m_j + d_j)
inline std::vector<double> stretch_update(std::span<const double> stretches,
                                          std::span<const double> moves,
                                          std::span<const double> drift) {
    const std::size_t n = stretches.size();
    detail::require_same_length(n, moves.size(), "stretch_update (moves)");
    detail::require_same_length(n, drift.size(), "stretch_update (drift)");
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        total += moves[j] + drift[j];
    }
    const double inv = 1.0 / static_cast<double>(n - 1);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double own = moves[i] + drift[i];
        out[i] = stretches[i] - own + (total - own) * inv;
    }
    return out;
}

/// Empirical cost: mean absolute stretch over a sample.
inline double cost_estimate(std::span<const double> samples) {
    if (samples.empty()) {
        throw std::invalid_argument("cost_estimate: empty sample");
    }
    double acc = 0.0;
    for (double s : samples) {
        acc += std::abs(s);
    }
    return acc / static_cast<double>(samples.size());
}

}  // namespace stoch_align
