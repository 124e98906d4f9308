// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stoch_align/analysis.hpp"
#include "stoch_align/game.hpp"
#include "stoch_align/kalman.hpp"
#include "stoch_align/sim.hpp"
#include "stoch_align/structured_matrix.hpp"

using namespace stoch_align;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

ModelConfig cfg_of(int n, double s0, double sm, double sd, int horizon = 100, std::uint64_t seed = 1) {
    ModelConfig c;
    c.n = n;
    c.sigma0 = s0;
    c.sigma_m = sm;
    c.sigma_d = sd;
    c.horizon = horizon;
    c.seed = seed;
    return c;
}

// Largest |sum_i stretch_i| seen by any simulation in this run.
double g_worst_stretch_sum = 0.0;

void note_sums(const std::vector<RoundStats>& stats) {
    for (const auto& s : stats) g_worst_stretch_sum = std::max(g_worst_stretch_sum, s.max_abs_stretch_sum);
}

// 1. Limiting variance of W(rho) at round 200.
Outcome limiting_variance() {
    Outcome o;
    struct Case {
        int n;
        double rho, sm, sd;
    };
    for (const Case& k : {Case{2, 0.5, 1, 1}, Case{10, 0.3, 1, 2}, Case{5, 0.8, 2, 1}}) {
        const auto c = cfg_of(k.n, 1.0, k.sm, k.sd, 200, 101);
        const auto stats = run(c, ConstantWeighted{k.rho}, 100000, 0);
        note_sums(stats);
        const double emp = stats[200].empirical_var_stretch;
        const double pred = var_limit(k.rho, c);
        const double rel = std::abs(emp / pred - 1.0);
        o.detail += "n=" + std::to_string(k.n) + " rel_err=" + num(rel) + " ";
        if (rel > 0.02) o.pass = false;
    }
    return o;
}

// 2. Best constant responsiveness: sweep argmin, fine-grid argmin, golden ratio.
Outcome best_constant_rho() {
    Outcome o;
    std::string info;
    for (int n : {2, 10}) {
        const auto c = cfg_of(n, 1, 1, 1, 200, 202);
        const auto grid = make_grid(0.02, 1.0, 0.02);
        const auto rows = sweep_rho(c, grid, 20000, 200, 0);
        const SweepRow* best = nullptr;
        for (const auto& r : rows)
            if (!r.divergent && (best == nullptr || r.var_empirical < best->var_empirical)) best = &r;
        const double rs = rho_star_const(c);
        info += "n=" + std::to_string(n) + " argmin=" + num(best->rho) + " rho*=" + num(rs) + " ";
        o.check(std::abs(best->rho - rs) <= 0.02 + 1e-12, "sweep argmin off for n=" + std::to_string(n));

        double fine_best = 0.0;
        double fine_val = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 10000; ++i) {
            const double v = var_limit(i * 1e-4, c);
            if (v < fine_val) {
                fine_val = v;
                fine_best = i * 1e-4;
            }
        }
        o.check(std::abs(fine_best - rs) <= 1e-4 + 1e-12, "fine grid argmin off for n=" + std::to_string(n));
    }
    const double golden = rho_star_const(cfg_of(1000000, 1, 1, 1));
    info += "rho*(n=1e6)=" + num(golden);
    o.check(std::abs(golden - (std::sqrt(5.0) - 1.0) / 2.0) <= 1e-3, "golden ratio");
    o.detail = info + (o.detail.empty() ? "" : " | " + o.detail);
    return o;
}

// 3. Dense filter against the closed forms.
Outcome kalman_closed_form() {
    double worst = 0.0;
    for (int n : {2, 3, 10}) {
        for (const auto& c : {cfg_of(n, 1, 1, 1), cfg_of(n, 2, 0.5, 1.5), cfg_of(n, 0.3, 2, 0.7)}) {
            const auto sys = alignment_system(c);
            const AlphaSchedule sched(c, 100);
            auto s = alignment_initial_state(c);
            const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
            for (int t = 0; t <= 100; ++t) {
                const auto cf = closed_form_filter_state(sched, t);
                worst = std::max(worst, (s.cov_pre - to_dense(cf.cov_pre)).cwiseAbs().maxCoeff());
                worst = std::max(worst, (gain(s, sys) - to_dense(cf.gain)).cwiseAbs().maxCoeff());
                s = time_update(measurement_update(s, sys, zero), sys, zero);
            }
        }
    }
    return {worst <= 1e-9, "max entrywise deviation=" + num(worst)};
}

// 4. W* and MatC under shared noise.
Outcome shift_equivalence() {
    const auto c = cfg_of(3, 1, 1, 1, 100, 404);
    const auto res = run_paired(c, WStar{}, MeetAtCenter{}, 100);
    note_sums(res.a);
    note_sums(res.b);
    double diff = 0.0, spread = 0.0, err = 0.0;
    for (const auto& r : res.rounds) {
        diff = std::max(diff, r.max_stretch_diff);
        spread = std::max(spread, r.max_shift_spread);
        err = std::max(err, r.max_shift_error);
    }
    Outcome o;
    o.detail = "stretch_diff=" + num(diff) + " shift_spread=" + num(spread) + " shift_error=" + num(err);
    o.pass = diff <= 1e-9 && spread <= 1e-12 && err <= 1e-12;
    return o;
}

// 5. Convergence of alpha_t and rho*(t), with the geometric envelope.
Outcome alpha_convergence() {
    Outcome o;
    double worst_a = 0.0, worst_r = 0.0, worst_excess = -1.0;
    for (const auto& c : {cfg_of(3, 1, 1, 1), cfg_of(2, 2, 0.5, 1.5), cfg_of(10, 0.5, 2, 0.8)}) {
        const AlphaSchedule s(c, 200);
        const double a_inf = alpha_infty(c);
        const double k = alpha_contraction(c);
        worst_a = std::max(worst_a, std::abs(s.alpha(200) - a_inf));
        worst_r = std::max(worst_r, std::abs(s.rho(200) - rho_star_const(c)));
        for (int t = 0; t < 200; ++t) {
            const double e0 = std::abs(s.alpha(t) - a_inf);
            const double e1 = std::abs(s.alpha(t + 1) - a_inf);
            // Below this the errors are rounding noise and their ratio is meaningless.
            if (e0 <= 1e-12) break;
            worst_excess = std::max(worst_excess, e1 / e0 - k);
        }
    }
    o.check(worst_a <= 1e-9, "alpha_200");
    o.check(worst_r <= 1e-9, "rho*(200)");
    o.check(worst_excess <= 1e-6, "envelope");
    o.detail = "|a200-a_inf|=" + num(worst_a) + " |rho200-rho*|=" + num(worst_r) +
               " max(ratio-k)=" + num(worst_excess) + (o.detail.empty() ? "" : " failed: " + o.detail);
    return o;
}

// 6. Best response to W* is W*.
Outcome nash_fixed_point() {
    double worst_rho = 0.0, worst_p = 0.0;
    for (const auto& c : {cfg_of(2, 1, 1, 1), cfg_of(3, 1, 1, 1), cfg_of(5, 2, 0.5, 1), cfg_of(10, 0.7, 1.3, 0.4)}) {
        const AlphaSchedule s(c, 50);
        const auto br = best_response(s.rhos(), c, 50);
        for (int t = 0; t <= 50; ++t) {
            worst_rho = std::max(worst_rho, std::abs(br.responsiveness[t] - s.rho(t)));
            worst_p = std::max(worst_p, std::abs(br.p_pre[t] - s.alpha(t)));
        }
    }
    return {worst_rho <= 1e-12 && worst_p <= 1e-10,
            "max|br-rho*|=" + num(worst_rho) + " max|p-alpha|=" + num(worst_p)};
}

// 7. W* is no worse than any W(rho), every round, under shared noise.
Outcome dominance() {
    auto c = cfg_of(5, 1, 1, 1, 200, 707);
    const std::vector<double> rhos{0.25, 0.5, 0.75, 1.0, rho_star_const(c)};
    RunPlan plan;
    plan.cfg = c;
    plan.replications = 100000;
    plan.threads = 0;
    plan.profiles.push_back(Profile{WStar{}, std::nullopt});
    for (double r : rhos) plan.profiles.push_back(Profile{ConstantWeighted{r}, std::nullopt});
    const auto res = run_group(plan);
    for (const auto& s : res.stats) note_sums(s);
    Outcome o;
    double tightest = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < res.stats.size(); ++k) {
        for (int t = 0; t <= c.horizon; ++t) {
            const auto& w = res.stats[0][t];
            const auto& r = res.stats[k][t];
            const double slack = r.empirical_mean_abs_stretch + 3.0 * r.std_error - w.empirical_mean_abs_stretch;
            tightest = std::min(tightest, slack);
            if (slack < 0.0) {
                o.check(false, "rho=" + num(rhos[k - 1]) + " t=" + std::to_string(t));
            }
        }
    }
    o.detail = "min slack=" + num(tightest) + (o.detail.empty() ? "" : " failed: " + o.detail);
    return o;
}

// 8. Invariants.
Outcome invariants() {
    Outcome o;

    // Structured algebra against dense products and inverses.
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    double mul_dev = 0.0, inv_dev = 0.0;
    for (int n = 2; n <= 10; ++n) {
        for (int trial = 0; trial < 50; ++trial) {
            const StructuredMatrix a{n, u(gen), u(gen)};
            const StructuredMatrix b{n, u(gen), u(gen)};
            const auto ab = mul(a, b);
            mul_dev = std::max(mul_dev, oracle::max_abs_diff(oracle::mnab(n, ab.diag, ab.off),
                                                             oracle::matmul(oracle::mnab(n, a.diag, a.off),
                                                                            oracle::mnab(n, b.diag, b.off))));
            if (std::abs(a.diag - a.off) < 0.1 || std::abs(a.diag + (n - 1) * a.off) < 0.1) continue;
            const auto id = mul(a, inverse(a));
            inv_dev = std::max(inv_dev, oracle::max_abs_diff(oracle::mnab(n, id.diag, id.off), oracle::mnab(n, 1, 0)));
        }
    }
    o.check(mul_dev <= 1e-12, "mul vs dense " + num(mul_dev));
    o.check(inv_dev <= 1e-10, "inverse " + num(inv_dev));

    // Normality of one agent's stretch, 10^6 independent replications.
    const auto nc = cfg_of(4, 1, 1, 1);
    std::vector<double> samples;
    samples.reserve(1000000);
    for (std::int64_t rep = 0; rep < 1000000; ++rep) {
        auto rng = RngStream::for_replication(808, static_cast<std::uint64_t>(rep));
        auto w = init_world(nc, rng);
        for (int t = 0; t < 10; ++t) {
            const auto y = measure(w, nc, rng);
            w = step(w, weighted_moves(y, 0.5), nc, rng);
        }
        samples.push_back(stretch(w)[0]);
    }
    const auto m = oracle::moments(samples);
    o.check(std::abs(m.skew) <= 0.02, "skew " + num(m.skew));
    o.check(std::abs(m.excess_kurtosis) <= 0.05, "kurtosis " + num(m.excess_kurtosis));

    // Determinism and thread invariance, compared bit for bit.
    const auto dc = cfg_of(6, 1, 1, 1, 60, 88);
    const auto first = run(dc, ConstantWeighted{0.4}, 3000, 1, {true, false});
    const auto second = run(dc, ConstantWeighted{0.4}, 3000, 1, {true, false});
    const auto threaded = run(dc, ConstantWeighted{0.4}, 3000, 4, {true, false});
    note_sums(first);
    auto bits_equal = [](const std::vector<RoundStats>& a, const std::vector<RoundStats>& b) {
        for (std::size_t t = 0; t < a.size(); ++t) {
            const double xa[] = {a[t].empirical_var_stretch, a[t].empirical_mean_abs_stretch, a[t].std_error,
                                 a[t].var_std_error, a[t].center_of_mass};
            const double xb[] = {b[t].empirical_var_stretch, b[t].empirical_mean_abs_stretch, b[t].std_error,
                                 b[t].var_std_error, b[t].center_of_mass};
            if (std::memcmp(xa, xb, sizeof xa) != 0) return false;
        }
        return a.size() == b.size();
    };
    o.check(bits_equal(first, second), "seeded rerun differs");
    o.check(bits_equal(first, threaded), "4-thread run differs from 1-thread run");

    // Every simulation in this binary kept sum_i stretch_i at zero.
    o.check(g_worst_stretch_sum <= 1e-10, "stretch sum " + num(g_worst_stretch_sum));

    o.detail = "mul_dev=" + num(mul_dev) + " inv_dev=" + num(inv_dev) + " skew=" + num(m.skew) +
               " ex_kurt=" + num(m.excess_kurtosis) + " max|sum stretch|=" + num(g_worst_stretch_sum) +
               (o.detail.empty() ? "" : " failed: " + o.detail);
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> fn;
    };
    // Invariants run last so the stretch-sum check covers every simulation above.
    const std::vector<Criterion> criteria{
        {1, "limiting variance of W(rho) at t=200", limiting_variance},
        {2, "best constant rho: sweep, fine grid, golden ratio", best_constant_rho},
        {3, "dense Kalman filter matches closed form", kalman_closed_form},
        {4, "W* / MatC shift equivalence", shift_equivalence},
        {5, "alpha_t and rho*(t) convergence", alpha_convergence},
        {6, "best response to W* is W*", nash_fixed_point},
        {7, "W* dominates W(rho) every round", dominance},
        {8, "invariant suite", invariants},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %d: %s (%s) [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
