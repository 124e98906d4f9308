#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "stoch_align/analysis.hpp"
#include "stoch_align/config.hpp"
#include "stoch_align/kalman.hpp"
#include "stoch_align/model.hpp"
#include "stoch_align/policies.hpp"
#include "stoch_align/rng.hpp"

namespace stoch_align {

// ===========================================================================
// Plan and results
// ===========================================================================

/// One agent playing its own weighted-average schedule while the rest follow
/// the profile's policy.
struct Deviation {
    int agent = 0;
    std::vector<double> responsiveness;  ///< past the end, the last value is reused
};

struct Profile {
    PolicySpec policy;
    std::optional<Deviation> deviation;
};

struct RecordFlags {
    bool center_of_mass = false;
    bool traces = false;  ///< per-agent stretches and moves of replication 0
};

/// Every profile in a plan is simulated against the same noise realizations
/// (common random numbers): same initial positions, same measurement noise,
/// same drift.
struct RunPlan {
    ModelConfig cfg;
    std::vector<Profile> profiles;
    int replications = 1;
    int threads = 1;  ///< <= 0 means all hardware threads
    RecordFlags record;
    int tracked_agent = -1;  ///< when >= 0, also collect |stretch| stats for this agent alone
};

struct RoundStats {
    int round = 0;
    double empirical_var_stretch = 0.0;       ///< mean of stretch^2 (the stretch mean is 0)
    double empirical_mean_abs_stretch = 0.0;  ///< empirical cost
    double std_error = 0.0;                   ///< of mean_abs, across replications
    double var_std_error = 0.0;               ///< of var, across replications
    double center_of_mass = 0.0;              ///< averaged over replications, when recorded
    double max_abs_stretch_sum = 0.0;         ///< worst |sum_i stretch_i| seen
    double tracked_mean_abs = 0.0;
    double tracked_std_error = 0.0;
};

/// Replication-0 trajectory of one profile.
struct Trace {
    std::vector<std::vector<double>> stretches;  ///< [round][agent]
    std::vector<std::vector<double>> moves;      ///< [round][agent], rounds 0..h-1
    std::vector<std::vector<double>> measurements;
    std::vector<double> center_of_mass;
};

struct GroupResult {
    std::vector<std::vector<RoundStats>> stats;  ///< [profile][round]
    std::vector<Trace> traces;                   ///< [profile], when recorded
};

/// Pathwise comparison of two profiles under shared noise, per round.
struct PairedRound {
    int round = 0;
    double com_a = 0.0;             ///< replication 0
    double com_b = 0.0;             ///< replication 0
    double max_stretch_diff = 0.0;  ///< over replications and agents
    double move_shift = 0.0;        ///< move_a - move_b of agent 0, replication 0
    double max_shift_spread = 0.0;  ///< max over replications of (max_i - min_i) of move_a - move_b
    double max_shift_error = 0.0;   ///< max over replications of |move_a_0 - move_b_0 - lambda_t|
};

struct PairedResult {
    std::vector<RoundStats> a;
    std::vector<RoundStats> b;
    std::vector<PairedRound> rounds;
    Trace trace_a;
    Trace trace_b;
};

// ===========================================================================
// Deterministic block-parallel reduction
// ===========================================================================

inline int resolve_threads(int requested) {
    if (requested > 0) {
        return requested;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Replications are cut into fixed-size blocks that do not depend on the
/// thread count. Each block is accumulated sequentially and blocks are merged
/// in index order, so the floating-point result is identical for any number
/// of threads.
template <class Acc, class MakeAcc, class Body>
Acc reduce_replications(std::int64_t replications, int threads, MakeAcc make, Body body) {
    constexpr std::int64_t kBlock = 256;
    const std::int64_t blocks = (replications + kBlock - 1) / kBlock;
    Acc total = make();
    std::mutex mu;
    std::map<std::int64_t, Acc> pending;
    std::int64_t next_merge = 0;
    std::atomic<std::int64_t> next_block{0};

    auto worker = [&] {
        for (;;) {
            const std::int64_t b = next_block.fetch_add(1);
            if (b >= blocks) {
                return;
            }
            Acc acc = make();
            const std::int64_t end = std::min(replications, (b + 1) * kBlock);
            for (std::int64_t rep = b * kBlock; rep < end; ++rep) {
                body(acc, rep);
            }
            std::lock_guard<std::mutex> lock(mu);
            pending.emplace(b, std::move(acc));
            while (!pending.empty() && pending.begin()->first == next_merge) {
                total.merge(pending.begin()->second);
                pending.erase(pending.begin());
                ++next_merge;
            }
        }
    };

    const int n_threads =
        static_cast<int>(std::min<std::int64_t>(resolve_threads(threads), std::max<std::int64_t>(blocks, 1)));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int i = 0; i < n_threads; ++i) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    return total;
}

// ===========================================================================
// Engine
// ===========================================================================

namespace detail {

/// Per-(profile, round) sums. Plain sums merge exactly in a fixed order.
struct RoundSums {
    double sum_sq = 0.0;
    double sum_abs = 0.0;
    double sum_rep_abs_sq = 0.0;
    double sum_rep_sq_sq = 0.0;
    double sum_com = 0.0;
    double max_abs_sum = 0.0;
    double sum_tracked = 0.0;
    double sum_tracked_sq = 0.0;

    void merge(const RoundSums& o) {
        sum_sq += o.sum_sq;
        sum_abs += o.sum_abs;
        sum_rep_abs_sq += o.sum_rep_abs_sq;
        sum_rep_sq_sq += o.sum_rep_sq_sq;
        sum_com += o.sum_com;
        max_abs_sum = std::max(max_abs_sum, o.max_abs_sum);
        sum_tracked += o.sum_tracked;
        sum_tracked_sq += o.sum_tracked_sq;
    }
};

struct PairSums {
    double max_stretch_diff = 0.0;
    double max_shift_spread = 0.0;
    double max_shift_error = 0.0;

    void merge(const PairSums& o) {
        max_stretch_diff = std::max(max_stretch_diff, o.max_stretch_diff);
        max_shift_spread = std::max(max_shift_spread, o.max_shift_spread);
        max_shift_error = std::max(max_shift_error, o.max_shift_error);
    }
};

struct GroupAcc {
    std::size_t profiles = 0;
    std::size_t rounds = 0;
    bool paired = false;
    std::vector<RoundSums> sums;  ///< [profile * rounds + round]
    std::vector<PairSums> pair;   ///< [round], profiles 0 and 1
    std::vector<Trace> traces;    ///< filled by replication 0 only

    GroupAcc(std::size_t k, std::size_t r, bool with_pair)
        : profiles(k), rounds(r), paired(with_pair), sums(k * r), pair(with_pair ? r : 0) {}

    RoundSums& at(std::size_t k, std::size_t t) { return sums[k * rounds + t]; }

    void merge(GroupAcc& o) {
        for (std::size_t i = 0; i < sums.size(); ++i) {
            sums[i].merge(o.sums[i]);
        }
        for (std::size_t i = 0; i < pair.size(); ++i) {
            pair[i].merge(o.pair[i]);
        }
        if (traces.empty() && !o.traces.empty()) {
            traces = std::move(o.traces);
        }
    }
};

inline double deviation_rho(const Deviation& d, int t) {
    if (d.responsiveness.empty()) {
        throw std::invalid_argument("Deviation: empty schedule");
    }
    const auto idx = static_cast<std::size_t>(t);
    return idx < d.responsiveness.size() ? d.responsiveness[idx] : d.responsiveness.back();
}

/// Simulate one replication of every profile under shared noise and feed the
/// accumulator. Stream layout per replication: n initial draws, then for each
/// round n measurement draws followed (except at the last round) by n drift draws.
inline void simulate_replication(const RunPlan& plan, const AlphaSchedule& sched, std::int64_t rep,
                                 GroupAcc& acc, bool keep_trace) {
    const ModelConfig& cfg = plan.cfg;
    const auto n = static_cast<std::size_t>(cfg.n);
    const std::size_t k_count = plan.profiles.size();
    const int horizon = cfg.horizon;

    RngStream rng = RngStream::for_replication(cfg.seed, static_cast<std::uint64_t>(rep));

    std::vector<double> init(n);
    draw_noise_into(rng, cfg.sigma0, init);
    std::vector<std::vector<double>> positions(k_count, init);
    std::vector<std::vector<double>> moves(k_count, std::vector<double>(n));
    std::vector<double> stretch(n);
    std::vector<double> y(n);
    std::vector<double> noise(n);
    std::vector<double> drift(n);
    // Stretches and measurements of profile 0, for the paired comparison.
    std::vector<double> stretch0(n);
    std::vector<double> y0(n);

    if (keep_trace) {
        acc.traces.assign(k_count, Trace{});
    }

    const bool track = plan.tracked_agent >= 0 && static_cast<std::size_t>(plan.tracked_agent) < n;
    const double inv_n = 1.0 / static_cast<double>(n);

    for (int t = 0; t <= horizon; ++t) {
        const auto tu = static_cast<std::size_t>(t);
        draw_noise_into(rng, cfg.sigma_m, noise);
        const bool last = (t == horizon);

        for (std::size_t k = 0; k < k_count; ++k) {
            stretch_into(positions[k], stretch);
            double sq = 0.0;
            double ab = 0.0;
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                sq += stretch[i] * stretch[i];
                ab += std::abs(stretch[i]);
                total += stretch[i];
                y[i] = stretch[i] + noise[i];
            }
            RoundSums& s = acc.at(k, tu);
            s.sum_sq += sq;
            s.sum_abs += ab;
            const double rep_abs = ab * inv_n;
            const double rep_sq = sq * inv_n;
            s.sum_rep_abs_sq += rep_abs * rep_abs;
            s.sum_rep_sq_sq += rep_sq * rep_sq;
            s.max_abs_sum = std::max(s.max_abs_sum, std::abs(total));
            if (plan.record.center_of_mass || keep_trace || acc.paired) {
                s.sum_com += center_of_mass(positions[k]);
            }
            if (track) {
                const double v = std::abs(stretch[static_cast<std::size_t>(plan.tracked_agent)]);
                s.sum_tracked += v;
                s.sum_tracked_sq += v * v;
            }

            if (!last) {
                const Profile& prof = plan.profiles[k];
                policy_moves_into(prof.policy, y, t, sched, moves[k]);
                if (prof.deviation) {
                    const auto a = static_cast<std::size_t>(prof.deviation->agent);
                    moves[k][a] = deviation_rho(*prof.deviation, t) * y[a];
                }
            }

            if (keep_trace) {
                Trace& tr = acc.traces[k];
                tr.stretches.push_back(stretch);
                tr.measurements.push_back(y);
                tr.center_of_mass.push_back(center_of_mass(positions[k]));
                if (!last) {
                    tr.moves.push_back(moves[k]);
                }
            }

            if (acc.paired && k == 0) {
                stretch0 = stretch;
                y0 = y;
            }
            if (acc.paired && k == 1) {
                PairSums& p = acc.pair[tu];
                for (std::size_t i = 0; i < n; ++i) {
                    p.max_stretch_diff = std::max(p.max_stretch_diff, std::abs(stretch0[i] - stretch[i]));
                }
                if (!last) {
                    double lo = moves[0][0] - moves[1][0];
                    double hi = lo;
                    for (std::size_t i = 1; i < n; ++i) {
                        const double d = moves[0][i] - moves[1][i];
                        lo = std::min(lo, d);
                        hi = std::max(hi, d);
                    }
                    p.max_shift_spread = std::max(p.max_shift_spread, hi - lo);
                    const double lambda = wstar_matc_shift(y0, sched.rho(t));
                    p.max_shift_error =
                        std::max(p.max_shift_error, std::abs(moves[0][0] - moves[1][0] - lambda));
                }
            }
        }

        if (last) {
            break;
        }
        draw_noise_into(rng, cfg.sigma_d, drift);
        for (std::size_t k = 0; k < k_count; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                positions[k][i] += moves[k][i] + drift[i];
            }
        }
    }
}

inline double std_error_of_mean(double sum, double sum_sq, double r) {
    if (r < 2.0) {
        return 0.0;
    }
    const double mean = sum / r;
    const double var = std::max(0.0, (sum_sq - r * mean * mean) / (r - 1.0));
    return std::sqrt(var / r);
}

/// Turn the sums of profile k into per-round statistics. Per-replication
/// statistics are agent averages, hence the divisions by n.
inline std::vector<RoundStats> finalize(const GroupAcc& acc, std::size_t k, std::int64_t reps, int agents) {
    const double r = static_cast<double>(reps);
    const double n = static_cast<double>(agents);
    std::vector<RoundStats> out(acc.rounds);
    for (std::size_t t = 0; t < acc.rounds; ++t) {
        const RoundSums& s = acc.sums[k * acc.rounds + t];
        RoundStats& o = out[t];
        o.round = static_cast<int>(t);
        o.empirical_mean_abs_stretch = s.sum_abs / (r * n);
        o.empirical_var_stretch = s.sum_sq / (r * n);
        o.std_error = std_error_of_mean(s.sum_abs / n, s.sum_rep_abs_sq, r);
        o.var_std_error = std_error_of_mean(s.sum_sq / n, s.sum_rep_sq_sq, r);
        o.center_of_mass = s.sum_com / r;
        o.max_abs_stretch_sum = s.max_abs_sum;
        o.tracked_mean_abs = s.sum_tracked / r;
        o.tracked_std_error = std_error_of_mean(s.sum_tracked, s.sum_tracked_sq, r);
    }
    return out;
}

}  // namespace detail

/// Simulate every profile of the plan under common random numbers.
inline GroupResult run_group(const RunPlan& plan) {
    plan.cfg.validate();
    if (plan.replications < 1) {
        throw ConfigError("replications must be >= 1");
    }
    if (plan.profiles.empty()) {
        throw ConfigError("run plan has no policy");
    }
    for (const auto& p : plan.profiles) {
        validate_policy(p.policy);
        if (p.deviation && (p.deviation->agent < 0 || p.deviation->agent >= plan.cfg.n)) {
            throw ConfigError("deviation agent index out of range");
        }
    }
    const AlphaSchedule sched(plan.cfg, plan.cfg.horizon);
    const std::size_t rounds = static_cast<std::size_t>(plan.cfg.horizon) + 1;
    const std::size_t k = plan.profiles.size();
    const bool paired = k == 2;
    const bool want_trace = plan.record.traces || paired;

    auto acc = reduce_replications<detail::GroupAcc>(
        plan.replications, plan.threads, [&] { return detail::GroupAcc(k, rounds, paired); },
        [&](detail::GroupAcc& a, std::int64_t rep) {
            detail::simulate_replication(plan, sched, rep, a, want_trace && rep == 0);
        });

    GroupResult out;
    out.stats.reserve(k);
    for (std::size_t p = 0; p < k; ++p) {
        out.stats.push_back(detail::finalize(acc, p, plan.replications, plan.cfg.n));
    }
    if (plan.record.traces) {
        out.traces = acc.traces;
    }
    return out;
}

/// Single-policy Monte Carlo run.
inline std::vector<RoundStats> run(const ModelConfig& cfg, const PolicySpec& policy, int replications,
                                   int threads = 1, RecordFlags record = {}) {
    RunPlan plan{cfg, {Profile{policy, std::nullopt}}, replications, threads, record, -1};
    return std::move(run_group(plan).stats.front());
}

/// Two policies against identical noise, with pathwise comparison.
inline PairedResult run_paired(const ModelConfig& cfg, const PolicySpec& a, const PolicySpec& b,
                               int replications, int threads = 1) {
    RunPlan plan{cfg, {Profile{a, std::nullopt}, Profile{b, std::nullopt}}, replications, threads,
                 RecordFlags{true, true}, -1};
    plan.cfg.validate();
    const AlphaSchedule sched(plan.cfg, plan.cfg.horizon);
    const std::size_t rounds = static_cast<std::size_t>(cfg.horizon) + 1;
    validate_policy(a);
    validate_policy(b);
    if (replications < 1) {
        throw ConfigError("replications must be >= 1");
    }

    auto acc = reduce_replications<detail::GroupAcc>(
        replications, threads, [&] { return detail::GroupAcc(2, rounds, true); },
        [&](detail::GroupAcc& g, std::int64_t rep) {
            detail::simulate_replication(plan, sched, rep, g, rep == 0);
        });

    PairedResult out;
    out.a = detail::finalize(acc, 0, replications, cfg.n);
    out.b = detail::finalize(acc, 1, replications, cfg.n);
    out.trace_a = acc.traces.at(0);
    out.trace_b = acc.traces.at(1);
    out.rounds.resize(rounds);
    for (std::size_t t = 0; t < rounds; ++t) {
        PairedRound& pr = out.rounds[t];
        pr.round = static_cast<int>(t);
        pr.com_a = out.trace_a.center_of_mass[t];
        pr.com_b = out.trace_b.center_of_mass[t];
        pr.max_stretch_diff = acc.pair[t].max_stretch_diff;
        pr.max_shift_spread = acc.pair[t].max_shift_spread;
        pr.max_shift_error = acc.pair[t].max_shift_error;
        if (t < out.trace_a.moves.size()) {
            pr.move_shift = out.trace_a.moves[t][0] - out.trace_b.moves[t][0];
        }
    }
    return out;
}

/// Steady-state estimate: mean of the per-round variance over the final 10%
/// of rounds (at least one round).
inline double tail_variance(std::span<const RoundStats> stats) {
    if (stats.empty()) {
        throw std::invalid_argument("tail_variance: no rounds");
    }
    const std::size_t count = std::max<std::size_t>(1, stats.size() / 10);
    double acc = 0.0;
    for (std::size_t i = stats.size() - count; i < stats.size(); ++i) {
        acc += stats[i].empirical_var_stretch;
    }
    return acc / static_cast<double>(count);
}

struct SweepRow {
    double rho = 0.0;
    double var_empirical = 0.0;
    double var_closed_form = 0.0;
    bool divergent = false;  ///< no finite limit exists for this rho
};

/// Run W(rho) for each grid point (all points share noise) and report the
/// tail-averaged variance next to the closed-form limit.
inline std::vector<SweepRow> sweep_rho(const ModelConfig& cfg, std::span<const double> grid,
                                       int replications, int horizon, int threads = 1) {
    if (grid.empty()) {
        throw ConfigError("sweep grid is empty");
    }
    ModelConfig c = cfg;
    c.horizon = horizon;
    RunPlan plan{c, {}, replications, threads, {}, -1};
    for (double rho : grid) {
        check_rho(rho);
        plan.profiles.push_back(Profile{ConstantWeighted{rho}, std::nullopt});
    }
    const auto res = run_group(plan);
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = var_limit(grid[i], c);
        rows.push_back({grid[i], tail_variance(res.stats[i]), v, !std::isfinite(v)});
    }
    return rows;
}

/// Inclusive grid start, start + step, ... up to stop (with a half-step slack
/// against rounding).
inline std::vector<double> make_grid(double start, double stop, double step) {
    if (!(step > 0.0) || stop < start) {
        throw ConfigError("grid needs step > 0 and stop >= start");
    }
    std::vector<double> g;
    const auto count = static_cast<long>(std::floor((stop - start) / step + 0.5));
    for (long i = 0; i <= count; ++i) {
        g.push_back(start + static_cast<double>(i) * step);
    }
    return g;
}

}  // namespace stoch_align
