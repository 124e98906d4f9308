#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "stoch_align/kalman.hpp"
#include "stoch_align/model.hpp"
#include "stoch_align/structured_matrix.hpp"

namespace stoch_align {

// ---------------------------------------------------------------------------
// Move rules
// ---------------------------------------------------------------------------

inline void check_rho(double rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) {
        throw std::invalid_argument("responsiveness rho must lie in [0, 1] (got " +
                                    std::to_string(rho) + ")");
    }
}

/// dtheta_i = rho * Y_i. No range check; callers validate constant rho.
inline void scaled_moves_into(std::span<const double> y, double rho, std::span<double> out) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        out[i] = rho * y[i];
    }
}

/// Meet at the center: dtheta = -((n-1)/n) rho*(t) M_n Y.
inline void matc_moves_into(std::span<const double> y, double rho_t, std::span<double> out) {
    const int n = static_cast<int>(y.size());
    const double scale = -(static_cast<double>(n - 1) / static_cast<double>(n)) * rho_t;
    apply_into(scale * mn(n), y, out);
}

/// Weighted-average move with a constant responsiveness in [0, 1].
inline MoveVector weighted_moves(const MeasurementVector& y, double rho) {
    check_rho(rho);
    MoveVector m{std::vector<double>(y.values.size())};
    scaled_moves_into(y.values, rho, m.values);
    return m;
}

/// W*: weighted-average move with responsiveness rho*(t).
inline MoveVector wstar_moves(const MeasurementVector& y, int t, const AlphaSchedule& sched) {
    MoveVector m{std::vector<double>(y.values.size())};
    scaled_moves_into(y.values, sched.rho(t), m.values);
    return m;
}

inline MoveVector matc_moves(const MeasurementVector& y, int t, const AlphaSchedule& sched) {
    if (y.values.size() < 2) {
        throw std::invalid_argument("matc_moves: need at least two agents");
    }
    MoveVector m{std::vector<double>(y.values.size())};
    matc_moves_into(y.values, sched.rho(t), m.values);
    return m;
}

/// Translate every agent's move by the same amount.
inline MoveVector shifted_moves(const MoveVector& base, double lambda) {
    MoveVector m = base;
    for (auto& v : m.values) {
        v += lambda;
    }
    return m;
}

/// The common translation between W* and MatC at round t:
/// lambda_t = (1/n) rho*(t) sum_i Y_i, with W* = MatC + lambda_t.
inline double wstar_matc_shift(std::span<const double> y, double rho_t) {
    return rho_t * std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
}

// ---------------------------------------------------------------------------
// Policy specifications
// ---------------------------------------------------------------------------

/// W(rho): the same rho at every round.
struct ConstantWeighted {
    double rho = 0.5;
};

/// W(rho(t)) with an explicit schedule. Rounds past the end reuse the last value.
struct ScheduledWeighted {
    std::vector<double> rhos;

    double at(int t) const {
        if (rhos.empty()) {
            throw std::invalid_argument("ScheduledWeighted: empty schedule");
        }
        const auto idx = static_cast<std::size_t>(t);
        return idx < rhos.size() ? rhos[idx] : rhos.back();
    }
};

/// W(rho*(t)), the Kalman-derived schedule.
struct WStar {};

/// Meet at the center (centralized).
struct MeetAtCenter {};

using BasePolicy = std::variant<ConstantWeighted, ScheduledWeighted, WStar, MeetAtCenter>;

/// How a shifted policy picks its per-round translation lambda_t.
struct ShiftRule {
    enum class Kind {
        Constant,      ///< lambda_t = value
        MeanResponse,  ///< lambda_t = value * rho*(t) * mean(Y)
    };
    Kind kind = Kind::Constant;
    double value = 0.0;

    double lambda(std::span<const double> y, double rho_t) const {
        if (kind == Kind::Constant) {
            return value;
        }
        return value * wstar_matc_shift(y, rho_t);
    }
};

/// A base policy whose moves are all translated by lambda_t each round.
struct Shifted {
    BasePolicy base;
    ShiftRule rule;
};

using PolicySpec = std::variant<ConstantWeighted, ScheduledWeighted, WStar, MeetAtCenter, Shifted>;

inline void validate_policy(const PolicySpec& spec) {
    std::visit(
        [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ConstantWeighted>) {
                check_rho(p.rho);
            } else if constexpr (std::is_same_v<T, ScheduledWeighted>) {
                if (p.rhos.empty()) {
                    throw std::invalid_argument("scheduled policy needs at least one rho");
                }
            } else if constexpr (std::is_same_v<T, Shifted>) {
                std::visit(
                    [](const auto& b) {
                        using B = std::decay_t<decltype(b)>;
                        if constexpr (std::is_same_v<B, ConstantWeighted>) {
                            check_rho(b.rho);
                        }
                    },
                    p.base);
            }
        },
        spec);
}

namespace detail {

inline void base_moves_into(const BasePolicy& base, std::span<const double> y, int t,
                            const AlphaSchedule& sched, std::span<double> out) {
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ConstantWeighted>) {
                scaled_moves_into(y, p.rho, out);
            } else if constexpr (std::is_same_v<T, ScheduledWeighted>) {
                scaled_moves_into(y, p.at(t), out);
            } else if constexpr (std::is_same_v<T, WStar>) {
                scaled_moves_into(y, sched.rho(t), out);
            } else {
                matc_moves_into(y, sched.rho(t), out);
            }
        },
        base);
}

}  // namespace detail

/// Moves produced by `spec` for measurements `y` at round t. Policies are
/// memoryless given the public schedule.
inline void policy_moves_into(const PolicySpec& spec, std::span<const double> y, int t,
                              const AlphaSchedule& sched, std::span<double> out) {
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Shifted>) {
                detail::base_moves_into(p.base, y, t, sched, out);
                const double lambda = p.rule.lambda(y, sched.rho(t));
                for (auto& v : out) {
                    v += lambda;
                }
            } else {
                detail::base_moves_into(BasePolicy{p}, y, t, sched, out);
            }
        },
        spec);
}

inline MoveVector policy_moves(const PolicySpec& spec, const MeasurementVector& y, int t,
                               const AlphaSchedule& sched) {
    MoveVector m{std::vector<double>(y.values.size())};
    policy_moves_into(spec, y.values, t, sched, m.values);
    return m;
}

inline std::string policy_name(const PolicySpec& spec) {
    return std::visit(
        [](const auto& p) -> std::string {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ConstantWeighted>) {
                return "weighted(" + std::to_string(p.rho) + ")";
            } else if constexpr (std::is_same_v<T, ScheduledWeighted>) {
                return "scheduled";
            } else if constexpr (std::is_same_v<T, WStar>) {
                return "wstar";
            } else if constexpr (std::is_same_v<T, MeetAtCenter>) {
                return "matc";
            } else {
                return "shifted";
            }
        },
        spec);
}

}  // namespace stoch_align
