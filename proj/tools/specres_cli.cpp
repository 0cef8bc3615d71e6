// Experiment runner: every solver and the market simulator behind one CLI.
// Exit codes: 0 success, 2 config validation error, 3 solver failure.

#include "specres/specres.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <string>

namespace {

struct CommonOptions {
    std::string config_path;
    std::string out_path;
    std::string profit = "db";
    std::uint64_t seed = 0;
    bool seed_given = false;
};

constexpr const char* kConfigHelp = R"(Config file: flat key = value lines under [section] headers, '#' comments.
All fields are optional; defaults reproduce the reference parameterization
(r=1, s=0.8, w=0.5, c=0.2; scheduled demand truncated-normal mean 30 variance
64; bursty demand chi-square dof 30).

  [prices]    r, s, w, c, u_min
  [xi]        kind (truncated-normal|chi-square|point-mass|empirical-grid),
              mean, variance, lo, hi, dof, value, path
  [eps]       same fields as [xi]
  [sweep]     variable (w|sigma2|xi), from, to, steps
  [contract]  grid_size
  [aggregate] c_ex, n_max, replications, xi_mean, xi_variance, eps_dof
  [sim]       reservation_periods, accesses_per_period,
              policy (fixed-k|menu|centralized|db-sym|db-asym|wsd-opt),
              scheme (db-bearing-risk|wsd-bearing-risk), fixed_k
  [output]    path, seed
)";

specres::ExperimentConfig load_config(const CommonOptions& opts) {
    auto cfg = opts.config_path.empty()
                   ? specres::ExperimentConfig::defaults()
                   : specres::ExperimentConfig::load(opts.config_path);
    if (!opts.out_path.empty()) cfg.out_path = opts.out_path;
    if (opts.seed_given) cfg.seed = opts.seed;
    return cfg;
}

int emit(const specres::ExperimentConfig& cfg,
         const std::function<void(std::ostream&)>& writer) {
    if (cfg.out_path.empty()) {
        writer(std::cout);
        return 0;
    }
    std::ofstream out(cfg.out_path);
    if (!out) {
        std::cerr << "error: cannot open output file " << cfg.out_path << '\n';
        return 1;
    }
    writer(out);
    return 0;
}

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_profit = false) {
    cmd->add_option("--config", opts.config_path, "Experiment config file");
    cmd->add_option("--out", opts.out_path, "Output CSV path (default: stdout)");
    cmd->add_option("--seed", opts.seed, "Random seed override")
        ->each([&opts](const std::string&) { opts.seed_given = true; });
    if (with_profit)
        cmd->add_option("--profit", opts.profit, "Profit to report: db|wsd|network")
            ->check(CLI::IsMember({"db", "wsd", "network"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectrum reservation contract toolkit and market simulator"};
    app.require_subcommand(1);
    app.footer(kConfigHelp);

    CommonOptions opts;
    std::string fleet_path, details_path, trace_path;

    auto* reserve = app.add_subcommand(
        "reserve-sweep", "Benchmark reservations across the scheduled demand range");
    add_common(reserve, opts);

    auto* profit = app.add_subcommand(
        "profit-sweep", "Solution profits across the wholesale price sweep");
    add_common(profit, opts, true);

    auto* dump = app.add_subcommand(
        "contract-dump", "Both optimal menus with marginal prices");
    add_common(dump, opts);

    auto* variance = app.add_subcommand(
        "variance-sweep", "Solution profits across the scheduled demand variance");
    add_common(variance, opts, true);

    auto* aggregate = app.add_subcommand(
        "aggregate", "Pooled second-stage reservation gain across fleet sizes");
    add_common(aggregate, opts);
    aggregate->add_option("--fleet", fleet_path,
                          "Fleet scenario CSV (header wsd_id,xi); its prefixes "
                          "replace sampled fleets");
    aggregate->add_option("--details", details_path,
                          "Also write per-N reservation details CSV "
                          "(N,TK,OTK_star,profit_gain)");

    auto* simulate = app.add_subcommand(
        "simulate", "Monte Carlo run of the configured policy");
    add_common(simulate, opts);
    simulate->add_option("--trace", trace_path, "Also write a per-period trace CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = load_config(opts);
        if (reserve->parsed())
            return emit(cfg, [&](std::ostream& out) { specres::run_reserve_sweep(cfg, out); });
        if (profit->parsed()) {
            const auto select = specres::profit_select_from_string(opts.profit);
            return emit(cfg, [&](std::ostream& out) {
                specres::run_profit_sweep(cfg, select, out);
            });
        }
        if (dump->parsed())
            return emit(cfg, [&](std::ostream& out) { specres::run_contract_dump(cfg, out); });
        if (variance->parsed()) {
            const auto select = specres::profit_select_from_string(opts.profit);
            return emit(cfg, [&](std::ostream& out) {
                specres::run_variance_sweep(cfg, select, out);
            });
        }
        if (aggregate->parsed())
            return emit(cfg, [&](std::ostream& out) {
                specres::run_aggregate(cfg, out, fleet_path, details_path);
            });
        if (simulate->parsed())
            return emit(cfg, [&](std::ostream& out) {
                specres::run_simulate(cfg, out, trace_path);
            });
        std::cerr << "error: no subcommand selected\n";
        return 1;
    } catch (const specres::ConfigError& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return 2;
    } catch (const specres::SolverError& err) {
        std::cerr << "solver error: " << err.what() << '\n';
        return 3;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
}
