#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stoch_align/config.hpp"
#include "stoch_align/errors.hpp"
#include "stoch_align/structured_matrix.hpp"

namespace stoch_align {

// ===========================================================================
// Generic dense filter
// ===========================================================================

/// Time-invariant linear-Gaussian system
///   x_{t+1} = A x_t + B u_t + w_t,   w_t ~ N(0, Q)
///   z_t     = H x_t + v_t,           v_t ~ N(0, R)
struct LinearSystem {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd H;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;

    Eigen::Index dim() const { return A.rows(); }
};

/// Filter state within one round. The prior (pre-measurement) pair is always
/// set; the posterior pair is filled by measurement_update and cleared again
/// by time_update.
struct KalmanState {
    Eigen::VectorXd estimate_pre;
    Eigen::MatrixXd cov_pre;
    std::optional<Eigen::VectorXd> estimate_post;
    std::optional<Eigen::MatrixXd> cov_post;
    int round = 0;
};

inline Eigen::MatrixXd to_dense(const StructuredMatrix& m) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Constant(m.n, m.n, m.off);
    out.diagonal().setConstant(m.diag);
    return out;
}

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// The alignment problem written as a filtering problem over the stretch
/// vector: A = I, B = M_n, H = I, R = sigma_m^2 I, Q = sigma_d^2 M_n^2.
inline LinearSystem alignment_system(const ModelConfig& cfg) {
    cfg.validate();
    const Eigen::MatrixXd m = to_dense(mn(cfg.n));
    const auto eye = Eigen::MatrixXd::Identity(cfg.n, cfg.n);
    return LinearSystem{eye, m, eye, cfg.sigma_d * cfg.sigma_d * (m * m),
                        cfg.sigma_m * cfg.sigma_m * eye};
}

/// Round-0 filter state for the alignment problem: zero estimate, and the
/// covariance of M_n * theta with theta ~ N(0, sigma0^2 I).
inline KalmanState alignment_initial_state(const ModelConfig& cfg) {
    cfg.validate();
    const Eigen::MatrixXd m = to_dense(mn(cfg.n));
    KalmanState s;
    s.estimate_pre = Eigen::VectorXd::Zero(cfg.n);
    s.cov_pre = cfg.sigma0 * cfg.sigma0 * (m * m.transpose());
    s.round = 0;
    return s;
}

/// K = P^- H^T (H P^- H^T + R)^{-1}
inline Eigen::MatrixXd gain(const KalmanState& state, const LinearSystem& sys) {
    const Eigen::MatrixXd innovation = sys.H * state.cov_pre * sys.H.transpose() + sys.R;
    // K S = P^- H^T  <=>  S^T K^T = H P^-^T
    Eigen::FullPivLU<Eigen::MatrixXd> lu(innovation.transpose());
    if (!lu.isInvertible()) {
        throw NumericalError("gain: innovation covariance is singular at round " +
                             std::to_string(state.round));
    }
    return lu.solve(sys.H * state.cov_pre.transpose()).transpose();
}

inline KalmanState measurement_update(const KalmanState& state, const LinearSystem& sys,
                                      const Eigen::VectorXd& z) {
    const Eigen::MatrixXd k = gain(state, sys);
    KalmanState out = state;
    out.estimate_post = state.estimate_pre + k * (z - sys.H * state.estimate_pre);
    const auto eye = Eigen::MatrixXd::Identity(sys.dim(), sys.dim());
    out.cov_post = (eye - k * sys.H) * state.cov_pre;
    return out;
}

/// Propagate to the next round's prior. Requires a posterior.
inline KalmanState time_update(const KalmanState& state, const LinearSystem& sys,
                               const Eigen::VectorXd& u) {
    if (!state.estimate_post || !state.cov_post) {
        throw std::logic_error("time_update: measurement_update has not been applied");
    }
    KalmanState out;
    out.estimate_pre = sys.A * *state.estimate_post + sys.B * u;
    out.cov_pre = sys.A * *state.cov_post * sys.A.transpose() + sys.Q;
    out.round = state.round + 1;
    return out;
}

// ===========================================================================
// Closed form for the alignment problem
// ===========================================================================

/// One step of the scalar covariance recursion
///   alpha' = sigma_m^2 alpha / (r alpha + sigma_m^2) + r sigma_d^2,  r = n/(n-1)
inline double alpha_next(const ModelConfig& cfg, double alpha) {
    const double r = cfg.ratio();
    const double vm = cfg.sigma_m * cfg.sigma_m;
    return vm * alpha / (r * alpha + vm) + r * cfg.sigma_d * cfg.sigma_d;
}

/// Optimal per-round responsiveness for a given alpha: alpha / (r alpha + sigma_m^2).
inline double rho_from_alpha(const ModelConfig& cfg, double alpha) {
    return alpha / (cfg.ratio() * alpha + cfg.sigma_m * cfg.sigma_m);
}

inline double alpha_initial(const ModelConfig& cfg) {
    return cfg.ratio() * cfg.sigma0 * cfg.sigma0;
}

/// The sequences alpha_t and rho*(t), computed eagerly up to t_max.
///
/// Immutable after construction. Queries past the cached range continue the
/// recursion from the last cached value without modifying the object, so a
/// schedule can be shared across threads.
class AlphaSchedule {
public:
    AlphaSchedule(const ModelConfig& cfg, int t_max) : cfg_(cfg) {
        cfg_.validate();
        if (t_max < 0) {
            throw std::invalid_argument("alpha_schedule: t_max must be >= 0");
        }
        alphas_.reserve(static_cast<std::size_t>(t_max) + 1);
        rhos_.reserve(static_cast<std::size_t>(t_max) + 1);
        double a = alpha_initial(cfg_);
        for (int t = 0; t <= t_max; ++t) {
            alphas_.push_back(a);
            rhos_.push_back(rho_from_alpha(cfg_, a));
            a = alpha_next(cfg_, a);
        }
    }

    const ModelConfig& config() const { return cfg_; }
    int t_max() const { return static_cast<int>(alphas_.size()) - 1; }
    const std::vector<double>& alphas() const { return alphas_; }
    const std::vector<double>& rhos() const { return rhos_; }

    double alpha(int t) const {
        if (t < 0) {
            throw std::out_of_range("AlphaSchedule: negative round");
        }
        if (t <= t_max()) {
            return alphas_[static_cast<std::size_t>(t)];
        }
        double a = alphas_.back();
        for (int s = t_max(); s < t; ++s) {
            a = alpha_next(cfg_, a);
        }
        return a;
    }

    double rho(int t) const {
        if (t >= 0 && t <= t_max()) {
            return rhos_[static_cast<std::size_t>(t)];
        }
        return rho_from_alpha(cfg_, alpha(t));
    }

private:
    ModelConfig cfg_;
    std::vector<double> alphas_;
    std::vector<double> rhos_;
};

inline AlphaSchedule alpha_schedule(const ModelConfig& cfg, int t_max) {
    return AlphaSchedule(cfg, t_max);
}

struct ClosedFormFilterState {
    StructuredMatrix cov_pre;  ///< -alpha_t M_n
    StructuredMatrix gain;     ///< -rho*(t) M_n
};

inline ClosedFormFilterState closed_form_filter_state(const AlphaSchedule& sched, int t) {
    const auto m = mn(sched.config().n);
    return {-sched.alpha(t) * m, -sched.rho(t) * m};
}

inline ClosedFormFilterState closed_form_filter_state(const ModelConfig& cfg, int t) {
    return closed_form_filter_state(AlphaSchedule(cfg, t), t);
}

/// Posterior covariance for a given alpha:
///   -((n-1)/n) sigma_m^2 alpha / (alpha + ((n-1)/n) sigma_m^2) * M_n
inline StructuredMatrix closed_form_cov_post(const ModelConfig& cfg, double alpha) {
    const double c = (1.0 / cfg.ratio()) * cfg.sigma_m * cfg.sigma_m;
    return -(c * alpha / (alpha + c)) * mn(cfg.n);
}

// ===========================================================================
// Scalar filter seen by one agent while everyone else runs W(rho(t))
// ===========================================================================

struct ScalarFilterStep {
    double gain;    ///< K_t = P^- / (P^- + sigma_m^2)
    double p_next;  ///< P^-_{t+1}
};

/// One step of the one-dimensional filter with A = 1 - rho_opp/(n-1), B = -1,
/// H = 1, R = sigma_m^2, Q = (rho_opp^2 sigma_m^2 + sigma_d^2)/(n-1) + sigma_d^2.
inline ScalarFilterStep scalar_filter_step(double p_pre, double rho_opp, const ModelConfig& cfg) {
    if (!(p_pre >= 0.0)) {
        throw std::invalid_argument("scalar_filter_step: p_pre must be >= 0");
    }
    const double vm = cfg.sigma_m * cfg.sigma_m;
    const double vd = cfg.sigma_d * cfg.sigma_d;
    const double inv = 1.0 / static_cast<double>(cfg.n - 1);
    const double a = 1.0 - rho_opp * inv;
    const double k = p_pre / (p_pre + vm);
    const double p_post = p_pre * vm / (p_pre + vm);
    const double q = inv * (rho_opp * rho_opp * vm + vd) + vd;
    return {k, a * a * p_post + q};
}

}  // namespace stoch_align
