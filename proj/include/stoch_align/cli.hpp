#pragma once

// Subcommand implementations for the stoch_align command-line tool. Kept in a
// header so tests can drive them without spawning a process.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stoch_align/analysis.hpp"
#include "stoch_align/config.hpp"
#include "stoch_align/errors.hpp"
#include "stoch_align/game.hpp"
#include "stoch_align/kalman.hpp"
#include "stoch_align/policies.hpp"
#include "stoch_align/sim.hpp"

namespace stoch_align::cli {

enum ExitCode : int { kOk = 0, kAssertFail = 1, kUsage = 2 };

/// Tolerances the assertion modes check against.
inline constexpr double kStretchTol = 1e-9;
inline constexpr double kShiftTol = 1e-12;
inline constexpr double kKalmanTol = 1e-9;
inline constexpr double kNashTol = 1e-12;

/// Resolved options for every subcommand. The first block is the JSON config
/// schema; the second block is flag-only.
struct CliConfig {
    int n = 3;
    double sigma0 = 1.0;
    double sigma_m = 1.0;
    double sigma_d = 1.0;
    int horizon = 100;
    std::optional<int> replications;  ///< subcommand default when unset
    std::uint64_t seed = 1;
    std::string policy = "wstar";
    double rho = 0.5;
    double grid_start = 0.02;
    double grid_stop = 1.0;
    double grid_step = 0.02;
    std::string out;  ///< subcommand default when empty

    int threads = 0;  ///< 0: STOCH_ALIGN_THREADS, else all cores
    std::string policy_a = "wstar";
    std::string policy_b = "matc";
    double rho_a = 0.5;
    double rho_b = 0.5;
    double shift = 0.0;
    std::string opp = "wstar";
    bool assert_nash = false;
    double tol = kNashTol;

    ModelConfig model() const {
        ModelConfig m;
        m.n = n;
        m.sigma0 = sigma0;
        m.sigma_m = sigma_m;
        m.sigma_d = sigma_d;
        m.horizon = horizon;
        m.seed = seed;
        return m;
    }
};

inline const std::set<std::string>& config_keys() {
    static const std::set<std::string> keys{"n",       "sigma0",     "sigma_m",   "sigma_d",
                                            "horizon", "replications", "seed",    "policy",
                                            "rho",     "grid_start", "grid_stop", "grid_step",
                                            "out"};
    return keys;
}

/// Merge a flat JSON object into `cfg`. Unknown keys and mistyped values are
/// configuration errors.
inline void apply_json(CliConfig& cfg, const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("config file must contain a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!config_keys().contains(key)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    try {
        if (j.contains("n")) cfg.n = j.at("n").get<int>();
        if (j.contains("sigma0")) cfg.sigma0 = j.at("sigma0").get<double>();
        if (j.contains("sigma_m")) cfg.sigma_m = j.at("sigma_m").get<double>();
        if (j.contains("sigma_d")) cfg.sigma_d = j.at("sigma_d").get<double>();
        if (j.contains("horizon")) cfg.horizon = j.at("horizon").get<int>();
        if (j.contains("replications")) cfg.replications = j.at("replications").get<int>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("policy")) cfg.policy = j.at("policy").get<std::string>();
        if (j.contains("rho")) cfg.rho = j.at("rho").get<double>();
        if (j.contains("grid_start")) cfg.grid_start = j.at("grid_start").get<double>();
        if (j.contains("grid_stop")) cfg.grid_stop = j.at("grid_stop").get<double>();
        if (j.contains("grid_step")) cfg.grid_step = j.at("grid_step").get<double>();
        if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad value in config file: ") + e.what());
    }
}

inline void load_json_file(CliConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse config file '" + path + "': " + e.what());
    }
    apply_json(cfg, j);
}

/// Everything that was used for a run, for the reproducibility sidecar.
inline nlohmann::json resolved_json(const CliConfig& c, const std::string& command) {
    nlohmann::json j;
    j["command"] = command;
    j["n"] = c.n;
    j["sigma0"] = c.sigma0;
    j["sigma_m"] = c.sigma_m;
    j["sigma_d"] = c.sigma_d;
    j["horizon"] = c.horizon;
    j["replications"] = c.replications.value_or(0);
    j["seed"] = c.seed;
    j["policy"] = c.policy;
    j["rho"] = c.rho;
    j["grid_start"] = c.grid_start;
    j["grid_stop"] = c.grid_stop;
    j["grid_step"] = c.grid_step;
    j["out"] = c.out;
    j["threads"] = c.threads;
    j["a"] = c.policy_a;
    j["b"] = c.policy_b;
    j["rho_a"] = c.rho_a;
    j["rho_b"] = c.rho_b;
    j["shift"] = c.shift;
    j["opp"] = c.opp;
    j["assert_nash"] = c.assert_nash;
    j["tol"] = c.tol;
    return j;
}

/// Thread count: explicit flag, then STOCH_ALIGN_THREADS, then all cores.
inline int resolve_cli_threads(int flag) {
    if (flag > 0) {
        return flag;
    }
    if (const char* env = std::getenv("STOCH_ALIGN_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) {
            return v;
        }
    }
    return resolve_threads(0);
}

/// Round-trippable decimal: 17 significant digits.
inline std::string fmt(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline PolicySpec parse_policy(const std::string& name, double rho, double shift) {
    if (name == "weighted") {
        check_rho(rho);
        return ConstantWeighted{rho};
    }
    if (name == "wstar") {
        return WStar{};
    }
    if (name == "matc") {
        return MeetAtCenter{};
    }
    if (name == "shifted") {
        return Shifted{WStar{}, ShiftRule{ShiftRule::Kind::Constant, shift}};
    }
    throw ConfigError("unknown policy '" + name + "' (expected weighted, wstar, matc or shifted)");
}

namespace detail {

inline void validate_common(const CliConfig& c) {
    c.model().validate();
    if (!(c.rho >= 0.0 && c.rho <= 1.0)) {
        throw ConfigError("--rho must lie in [0, 1] (got " + fmt(c.rho) + ")");
    }
    if (c.replications && *c.replications < 1) {
        throw ConfigError("replications must be >= 1");
    }
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) {
        throw ConfigError("cannot write '" + path + "'");
    }
    return f;
}

inline void write_sidecar(const CliConfig& c, const std::string& command) {
    auto f = open_out(c.out + ".config.json");
    f << resolved_json(c, command).dump(2) << '\n';
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline int cmd_simulate(CliConfig c, std::ostream& out, std::ostream& err) {
    try {
        detail::validate_common(c);
        if (c.out.empty()) c.out = "simulate.csv";
        if (!c.replications) c.replications = 10000;
        const PolicySpec policy = parse_policy(c.policy, c.rho, c.shift);
        const ModelConfig m = c.model();
        const auto stats = run(m, policy, *c.replications, resolve_cli_threads(c.threads));

        auto f = detail::open_out(c.out);
        f << "round,var_stretch,mean_abs_stretch,stderr\n";
        for (const auto& s : stats) {
            f << s.round << ',' << fmt(s.empirical_var_stretch) << ','
              << fmt(s.empirical_mean_abs_stretch) << ',' << fmt(s.std_error) << '\n';
        }
        detail::write_sidecar(c, "simulate");

        const auto& last = stats.back();
        out << "policy " << c.policy << ", n=" << m.n << ", rounds=" << m.horizon
            << ", replications=" << *c.replications << '\n';
        out << "final round: var_stretch=" << fmt(last.empirical_var_stretch)
            << " mean_abs_stretch=" << fmt(last.empirical_mean_abs_stretch) << '\n';
        if (c.policy == "weighted") {
            const auto pred = predict_steady_state(c.rho, m);
            out << "closed form: var_limit=" << fmt(pred.var_limit)
                << " cost_limit=" << fmt(pred.cost_limit) << '\n';
        } else if (c.policy == "wstar" || c.policy == "matc" || c.policy == "shifted") {
            out << "closed form (constant rho*): rho*=" << fmt(rho_star_const(m))
                << " var_limit=" << fmt(var_limit(rho_star_const(m), m)) << '\n';
        }
        out << "wrote " << c.out << '\n';
        return kOk;
    } catch (const std::exception& e) {
        err << "simulate: " << e.what() << '\n';
        return kUsage;
    }
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

inline int cmd_compare(CliConfig c, std::ostream& out, std::ostream& err) {
    PairedResult res;
    try {
        detail::validate_common(c);
        if (c.out.empty()) c.out = "compare.csv";
        if (!c.replications) c.replications = 100;
        const PolicySpec a = parse_policy(c.policy_a, c.rho_a, c.shift);
        const PolicySpec b = parse_policy(c.policy_b, c.rho_b, c.shift);
        res = run_paired(c.model(), a, b, *c.replications, resolve_cli_threads(c.threads));

        auto f = detail::open_out(c.out);
        f << "round,com_a,com_b,max_stretch_diff,move_shift\n";
        for (const auto& r : res.rounds) {
            f << r.round << ',' << fmt(r.com_a) << ',' << fmt(r.com_b) << ','
              << fmt(r.max_stretch_diff) << ',' << fmt(r.move_shift) << '\n';
        }
        detail::write_sidecar(c, "compare");
    } catch (const std::exception& e) {
        err << "compare: " << e.what() << '\n';
        return kUsage;
    }

    double stretch_diff = 0.0;
    double spread = 0.0;
    double shift_err = 0.0;
    for (const auto& r : res.rounds) {
        stretch_diff = std::max(stretch_diff, r.max_stretch_diff);
        spread = std::max(spread, r.max_shift_spread);
        shift_err = std::max(shift_err, r.max_shift_error);
    }
    out << "max stretch difference: " << fmt(stretch_diff) << '\n';
    out << "wrote " << c.out << '\n';
    if (c.policy_a == "wstar" && c.policy_b == "matc") {
        const bool ok = stretch_diff <= kStretchTol && spread <= kShiftTol && shift_err <= kShiftTol;
        out << "shift-equivalence (wstar vs matc): " << (ok ? "PASS" : "FAIL")
            << " stretch_diff=" << fmt(stretch_diff) << " shift_spread=" << fmt(spread)
            << " shift_error=" << fmt(shift_err) << '\n';
        return ok ? kOk : kAssertFail;
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

inline int cmd_sweep(CliConfig c, std::ostream& out, std::ostream& err) {
    std::vector<SweepRow> rows;
    ModelConfig m;
    try {
        detail::validate_common(c);
        if (c.out.empty()) c.out = "sweep.csv";
        if (!c.replications) c.replications = 10000;
        if (c.grid_start < 0.0 || c.grid_stop > 1.0) {
            throw ConfigError("sweep grid must lie in [0, 1]");
        }
        const auto grid = make_grid(c.grid_start, c.grid_stop, c.grid_step);
        m = c.model();
        rows = sweep_rho(m, grid, *c.replications, m.horizon, resolve_cli_threads(c.threads));

        auto f = detail::open_out(c.out);
        f << "rho,var_empirical,var_closed_form\n";
        for (const auto& r : rows) {
            f << fmt(r.rho) << ',' << (r.divergent ? std::string("divergent") : fmt(r.var_empirical))
              << ',' << fmt(r.var_closed_form) << '\n';
        }
        detail::write_sidecar(c, "sweep");
    } catch (const std::exception& e) {
        err << "sweep: " << e.what() << '\n';
        return kUsage;
    }

    const SweepRow* best = nullptr;
    for (const auto& r : rows) {
        if (!r.divergent && (best == nullptr || r.var_empirical < best->var_empirical)) {
            best = &r;
        }
    }
    if (best != nullptr) {
        out << "empirical argmin rho=" << fmt(best->rho) << " var=" << fmt(best->var_empirical) << '\n';
    } else {
        out << "empirical argmin: none (all grid points divergent)\n";
    }
    out << "rho_star_const=" << fmt(rho_star_const(m)) << '\n';
    out << "wrote " << c.out << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------
// kalman-check
// ---------------------------------------------------------------------------

struct KalmanCheckRow {
    int t;
    double alpha;
    double rho_star;
    double cov_dev;
    double gain_dev;
};

/// Run the dense filter on the alignment system and compare P^- and K with
/// the closed forms at every round 0..t_max.
inline std::vector<KalmanCheckRow> kalman_check_rows(const ModelConfig& cfg, int t_max) {
    const LinearSystem sys = alignment_system(cfg);
    const AlphaSchedule sched(cfg, t_max);
    KalmanState st = alignment_initial_state(cfg);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(cfg.n);
    std::vector<KalmanCheckRow> rows;
    for (int t = 0; t <= t_max; ++t) {
        const auto closed = closed_form_filter_state(sched, t);
        const Eigen::MatrixXd k = gain(st, sys);
        const double cov_dev = (st.cov_pre - to_dense(closed.cov_pre)).cwiseAbs().maxCoeff();
        const double gain_dev = (k - to_dense(closed.gain)).cwiseAbs().maxCoeff();
        rows.push_back({t, sched.alpha(t), sched.rho(t), cov_dev, gain_dev});
        st = time_update(measurement_update(st, sys, zero), sys, zero);
    }
    return rows;
}

inline int cmd_kalman_check(CliConfig c, std::ostream& out, std::ostream& err) {
    std::vector<KalmanCheckRow> rows;
    ModelConfig m;
    try {
        detail::validate_common(c);
        if (c.out.empty()) c.out = "kalman_check.csv";
        m = c.model();
        rows = kalman_check_rows(m, m.horizon);
        auto f = detail::open_out(c.out);
        f << "t,alpha,rho_star,max_dev_cov,max_dev_gain\n";
        for (const auto& r : rows) {
            f << r.t << ',' << fmt(r.alpha) << ',' << fmt(r.rho_star) << ',' << fmt(r.cov_dev) << ','
              << fmt(r.gain_dev) << '\n';
        }
        detail::write_sidecar(c, "kalman-check");
    } catch (const std::exception& e) {
        err << "kalman-check: " << e.what() << '\n';
        return kUsage;
    }
    double worst = 0.0;
    out << "t alpha_t rho*(t)\n";
    for (const auto& r : rows) {
        worst = std::max({worst, r.cov_dev, r.gain_dev});
        out << r.t << ' ' << fmt(r.alpha) << ' ' << fmt(r.rho_star) << '\n';
    }
    const double a_inf = alpha_infty(m);
    out << "alpha_infty=" << fmt(a_inf) << " residual |alpha_T - alpha_infty|="
        << fmt(std::abs(rows.back().alpha - a_inf)) << '\n';
    out << "max entrywise deviation dense vs closed form: " << fmt(worst) << '\n';
    const bool ok = worst <= kKalmanTol;
    out << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? kOk : kAssertFail;
}

// ---------------------------------------------------------------------------
// best-response
// ---------------------------------------------------------------------------

inline int cmd_best_response(CliConfig c, std::ostream& out, std::ostream& err) {
    std::vector<double> opp;
    BestResponseSchedule br;
    try {
        detail::validate_common(c);
        if (c.out.empty()) c.out = "best_response.csv";
        const ModelConfig m = c.model();
        if (c.opp == "wstar") {
            opp = AlphaSchedule(m, m.horizon).rhos();
        } else if (c.opp == "constant") {
            opp.assign(static_cast<std::size_t>(m.horizon) + 1, c.rho);
        } else {
            throw ConfigError("unknown opponent schedule '" + c.opp + "' (expected wstar or constant)");
        }
        br = best_response(opp, m, m.horizon);
        auto f = detail::open_out(c.out);
        f << "t,opp_rho,best_response,residual\n";
        for (std::size_t t = 0; t < opp.size(); ++t) {
            f << t << ',' << fmt(opp[t]) << ',' << fmt(br.responsiveness[t]) << ','
              << fmt(std::abs(br.responsiveness[t] - opp[t])) << '\n';
        }
        detail::write_sidecar(c, "best-response");
    } catch (const std::exception& e) {
        err << "best-response: " << e.what() << '\n';
        return kUsage;
    }
    double residual = 0.0;
    for (std::size_t t = 0; t < opp.size(); ++t) {
        residual = std::max(residual, std::abs(br.responsiveness[t] - opp[t]));
    }
    out << "max residual |best_response - opp| = " << fmt(residual) << '\n';
    out << "wrote " << c.out << '\n';
    if (c.opp == "wstar" || c.assert_nash) {
        const bool ok = residual <= c.tol;
        out << "nash fixed point: " << (ok ? "PASS" : "FAIL") << " (tol " << fmt(c.tol) << ")\n";
        return ok ? kOk : kAssertFail;
    }
    return kOk;
}

}  // namespace stoch_align::cli
