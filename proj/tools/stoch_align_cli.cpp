// Command-line front end. Parsing lives here; the subcommands are in cli.hpp.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stoch_align/cli.hpp"

namespace sa = stoch_align::cli;

namespace {

// Options shared by every subcommand. Values land in `c` only when the flag
// was actually given, so they override the JSON file instead of the defaults.
struct Flags {
    sa::CliConfig c;
    std::string config_path;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config_path, "JSON config file (flat object)");
    sub->add_option("--n", f.c.n, "number of agents");
    sub->add_option("--sigma0", f.c.sigma0, "initial position std-dev");
    sub->add_option("--sigma-m", f.c.sigma_m, "measurement noise std-dev");
    sub->add_option("--sigma-d", f.c.sigma_d, "drift std-dev");
    sub->add_option("--rounds,--horizon,--t-max", f.c.horizon, "number of rounds");
    sub->add_option("--seed", f.c.seed, "master seed");
    sub->add_option("--out", f.c.out, "output CSV path");
    sub->add_option("--threads", f.c.threads, "worker threads (default: STOCH_ALIGN_THREADS, else all cores)");
}

void add_reps(CLI::App* sub, Flags& f) {
    sub->add_option("--reps,--replications", f.c.replications, "Monte Carlo replications");
}

// Re-apply explicitly given flags on top of the file-loaded config.
sa::CliConfig resolve(const CLI::App* sub, const Flags& f) {
    sa::CliConfig c;
    if (!f.config_path.empty()) {
        sa::load_json_file(c, f.config_path);
    }
    const sa::CliConfig& g = f.c;
    auto given = [&](const char* name) { return sub->get_option_no_throw(name) != nullptr && sub->count(name) > 0; };
    if (given("--n")) c.n = g.n;
    if (given("--sigma0")) c.sigma0 = g.sigma0;
    if (given("--sigma-m")) c.sigma_m = g.sigma_m;
    if (given("--sigma-d")) c.sigma_d = g.sigma_d;
    if (given("--rounds")) c.horizon = g.horizon;
    if (given("--seed")) c.seed = g.seed;
    if (given("--out")) c.out = g.out;
    if (given("--reps")) c.replications = g.replications;
    if (given("--policy")) c.policy = g.policy;
    if (given("--rho")) c.rho = g.rho;
    if (given("--grid-start")) c.grid_start = g.grid_start;
    if (given("--grid-stop")) c.grid_stop = g.grid_stop;
    if (given("--grid-step")) c.grid_step = g.grid_step;
    c.threads = g.threads;
    if (given("--a")) c.policy_a = g.policy_a;
    if (given("--b")) c.policy_b = g.policy_b;
    if (given("--rho-a")) c.rho_a = g.rho_a;
    if (given("--rho-b")) c.rho_b = g.rho_b;
    if (given("--shift")) c.shift = g.shift;
    if (given("--opp")) c.opp = g.opp;
    c.assert_nash = g.assert_nash;
    if (given("--tol")) c.tol = g.tol;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic alignment: simulation, closed forms and checks"};
    app.require_subcommand(1);

    Flags f_sim, f_cmp, f_sweep, f_kal, f_br;

    auto* sim = app.add_subcommand("simulate", "Monte Carlo run of one policy");
    add_common(sim, f_sim);
    add_reps(sim, f_sim);
    sim->add_option("--policy", f_sim.c.policy, "weighted | wstar | matc | shifted");
    sim->add_option("--rho", f_sim.c.rho, "responsiveness for --policy weighted");
    sim->add_option("--shift", f_sim.c.shift, "constant per-round shift for --policy shifted");

    auto* cmp = app.add_subcommand("compare", "two policies against identical noise");
    add_common(cmp, f_cmp);
    add_reps(cmp, f_cmp);
    cmp->add_option("--a", f_cmp.c.policy_a, "first policy");
    cmp->add_option("--b", f_cmp.c.policy_b, "second policy");
    cmp->add_option("--rho-a", f_cmp.c.rho_a, "rho of the first policy when weighted");
    cmp->add_option("--rho-b", f_cmp.c.rho_b, "rho of the second policy when weighted");
    cmp->add_option("--shift", f_cmp.c.shift, "constant shift for a shifted policy");

    auto* sweep = app.add_subcommand("sweep", "W(rho) over a grid of rho");
    add_common(sweep, f_sweep);
    add_reps(sweep, f_sweep);
    sweep->add_option("--grid-start", f_sweep.c.grid_start, "first grid point");
    sweep->add_option("--grid-stop", f_sweep.c.grid_stop, "last grid point");
    sweep->add_option("--grid-step", f_sweep.c.grid_step, "grid step");

    auto* kal = app.add_subcommand("kalman-check", "dense filter vs closed form");
    add_common(kal, f_kal);

    auto* br = app.add_subcommand("best-response", "best response to an opponent schedule");
    add_common(br, f_br);
    br->add_option("--opp", f_br.c.opp, "wstar | constant");
    br->add_option("--rho", f_br.c.rho, "opponent rho for --opp constant");
    br->add_flag("--assert-nash", f_br.c.assert_nash, "fail unless the residual is within --tol");
    br->add_option("--tol", f_br.c.tol, "residual tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? sa::kOk : sa::kUsage;
    }

    try {
        if (*sim) return sa::cmd_simulate(resolve(sim, f_sim), std::cout, std::cerr);
        if (*cmp) return sa::cmd_compare(resolve(cmp, f_cmp), std::cout, std::cerr);
        if (*sweep) return sa::cmd_sweep(resolve(sweep, f_sweep), std::cout, std::cerr);
        if (*kal) return sa::cmd_kalman_check(resolve(kal, f_kal), std::cout, std::cerr);
        if (*br) return sa::cmd_best_response(resolve(br, f_br), std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return sa::kUsage;
    }
    return sa::kUsage;
}
