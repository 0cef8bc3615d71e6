#pragma once

// Experiment configuration and the sweep runners behind the CLI subcommands.
// Config files are flat key=value text under [section] headers; every runner
// is deterministic given (config, seed) and emits CSV at 9 significant
// digits, so reruns are byte-identical.

#include "specres/aggregate.hpp"
#include "specres/contract.hpp"
#include "specres/distribution.hpp"
#include "specres/market.hpp"
#include "specres/sim.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace specres {

// Configuration problems carry file/line/field context and map to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& text) {
    const auto begin = text.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = text.find_last_not_of(" \t\r");
    return text.substr(begin, end - begin + 1);
}

// Parsed key=value file; keys are addressed as "section.key". Consumed keys
// are tracked so typos can be reported after loading.
class ConfigFile {
public:
    static ConfigFile parse(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError(path + ": cannot open config file");
        ConfigFile file;
        file.path_ = path;
        std::string line, section;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string text = trim(line.substr(0, line.find('#')));
            if (text.empty()) continue;
            if (text.front() == '[') {
                if (text.back() != ']')
                    throw ConfigError(path + ":" + std::to_string(line_no) +
                                      ": malformed section header");
                section = trim(text.substr(1, text.size() - 2));
                continue;
            }
            const auto eq = text.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + ":" + std::to_string(line_no) +
                                  ": expected key = value");
            const std::string key = section + "." + trim(text.substr(0, eq));
            if (file.entries_.count(key))
                throw ConfigError(path + ":" + std::to_string(line_no) +
                                  ": duplicate key '" + key + "'");
            file.entries_[key] = {trim(text.substr(eq + 1)), line_no};
        }
        return file;
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        consumed_.insert(key);
        return it->second.value;
    }

    double get_double(const std::string& key, double fallback) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        consumed_.insert(key);
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second.value, &pos);
            if (pos != it->second.value.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(where(key) + ": field '" + key +
                              "' expects a number, got '" + it->second.value + "'");
        }
    }

    std::size_t get_count(const std::string& key, std::size_t fallback) {
        const double v = get_double(key, static_cast<double>(fallback));
        if (v < 0.0 || v != std::floor(v))
            throw ConfigError(where(key) + ": field '" + key +
                              "' expects a nonnegative integer");
        return static_cast<std::size_t>(v);
    }

    std::string where(const std::string& key) const {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return path_;
        return path_ + ":" + std::to_string(it->second.line);
    }

    void reject_unknown_keys() const {
        for (const auto& [key, entry] : entries_)
            if (consumed_.count(key) == 0)
                throw ConfigError(path_ + ":" + std::to_string(entry.line) +
                                  ": unknown field '" + key + "'");
    }

private:
    struct Entry {
        std::string value;
        std::size_t line = 0;
    };
    std::string path_;
    std::map<std::string, Entry> entries_;
    std::set<std::string> consumed_;
};

inline std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace detail

// Distribution specification as written in a config file.
struct DistSpec {
    std::string kind = "truncated-normal";
    double mean = 30.0;
    double variance = 64.0;
    double dof = 30.0;
    double value = 0.0;      // point-mass location
    std::string grid_path;   // empirical-grid csv
    std::optional<double> lo, hi;  // explicit truncation bounds

    DemandDistribution build() const {
        if (kind == "truncated-normal") {
            if (lo && hi)
                return DemandDistribution::truncated_normal(mean, variance, *lo, *hi);
            return DemandDistribution::truncated_normal_4sigma(mean, variance);
        }
        if (kind == "chi-square") return DemandDistribution::chi_square(dof);
        if (kind == "point-mass") return DemandDistribution::point_mass(value);
        if (kind == "empirical-grid")
            return DemandDistribution::load_grid_csv(grid_path);
        throw ConfigError("unknown distribution kind '" + kind + "'");
    }
};

struct SweepSpec {
    std::string variable;
    double from = 0.0;
    double to = 0.0;
    std::size_t steps = 2;  // number of sweep points, endpoints included

    std::vector<double> points() const {
        std::vector<double> xs(steps);
        for (std::size_t i = 0; i < steps; ++i)
            xs[i] = steps == 1 ? from
                               : from + (to - from) * static_cast<double>(i) /
                                            static_cast<double>(steps - 1);
        return xs;
    }
};

struct ExperimentConfig {
    MarketParams params{1.0, 0.8, 0.5, 0.2, 0.0};
    DistSpec xi_spec;   // defaults to truncated-normal(30, 64)
    DistSpec eps_spec;  // defaults to chi-square(30)
    std::optional<SweepSpec> sweep;
    std::size_t contract_grid = 200;
    std::string out_path;  // empty = stdout
    std::uint64_t seed = 1;

    // aggregate section
    double agg_c_ex = 0.4;
    std::size_t agg_n_max = 12;
    std::size_t agg_replications = 64;
    double agg_xi_mean = 9.0;
    double agg_xi_variance = 3.0;
    double agg_eps_dof = 20.0;

    // sim section
    std::size_t sim_periods = 500;
    std::size_t sim_accesses = 200;
    RiskScheme sim_scheme = RiskScheme::db_bearing;
    SimPolicy sim_policy = SimPolicy::menu;
    double sim_fixed_k = 50.0;

    DemandDistribution xi() const { return xi_spec.build(); }
    DemandDistribution eps() const { return eps_spec.build(); }

    static ExperimentConfig defaults() {
        ExperimentConfig cfg;
        cfg.eps_spec.kind = "chi-square";
        return cfg;
    }

    static ExperimentConfig load(const std::string& path) {
        auto file = detail::ConfigFile::parse(path);
        ExperimentConfig cfg = defaults();

        const double r = file.get_double("prices.r", cfg.params.r);
        const double s = file.get_double("prices.s", cfg.params.s);
        const double w = file.get_double("prices.w", cfg.params.w);
        const double c = file.get_double("prices.c", cfg.params.c);
        const double u_min = file.get_double("prices.u_min", cfg.params.u_min);
        try {
            cfg.params = MarketParams(r, s, w, c, u_min);
        } catch (const std::invalid_argument& err) {
            throw ConfigError(path + ": [prices] " + err.what());
        }

        const auto read_dist = [&](const std::string& section, DistSpec spec) {
            spec.kind = file.get_string(section + ".kind", spec.kind);
            spec.mean = file.get_double(section + ".mean", spec.mean);
            spec.variance = file.get_double(section + ".variance", spec.variance);
            spec.dof = file.get_double(section + ".dof", spec.dof);
            spec.value = file.get_double(section + ".value", spec.value);
            spec.grid_path = file.get_string(section + ".path", spec.grid_path);
            if (file.has(section + ".lo"))
                spec.lo = file.get_double(section + ".lo", 0.0);
            if (file.has(section + ".hi"))
                spec.hi = file.get_double(section + ".hi", 0.0);
            return spec;
        };
        cfg.xi_spec = read_dist("xi", cfg.xi_spec);
        cfg.eps_spec = read_dist("eps", cfg.eps_spec);

        if (file.has("sweep.variable")) {
            SweepSpec sweep;
            sweep.variable = file.get_string("sweep.variable", "");
            sweep.from = file.get_double("sweep.from", 0.0);
            sweep.to = file.get_double("sweep.to", 0.0);
            sweep.steps = file.get_count("sweep.steps", 2);
            if (sweep.steps < 1)
                throw ConfigError(file.where("sweep.steps") + ": steps must be >= 1");
            cfg.sweep = sweep;
        }

        cfg.contract_grid = file.get_count("contract.grid_size", cfg.contract_grid);
        if (cfg.contract_grid < 2)
            throw ConfigError(file.where("contract.grid_size") +
                              ": grid_size must be >= 2");

        cfg.agg_c_ex = file.get_double("aggregate.c_ex", cfg.agg_c_ex);
        cfg.agg_n_max = file.get_count("aggregate.n_max", cfg.agg_n_max);
        cfg.agg_replications =
            file.get_count("aggregate.replications", cfg.agg_replications);
        cfg.agg_xi_mean = file.get_double("aggregate.xi_mean", cfg.agg_xi_mean);
        cfg.agg_xi_variance =
            file.get_double("aggregate.xi_variance", cfg.agg_xi_variance);
        cfg.agg_eps_dof = file.get_double("aggregate.eps_dof", cfg.agg_eps_dof);
        if (!(cfg.agg_c_ex > cfg.params.c))
            throw ConfigError(file.where("aggregate.c_ex") +
                              ": replenishment cost must exceed the reservation cost");

        cfg.sim_periods = file.get_count("sim.reservation_periods", cfg.sim_periods);
        cfg.sim_accesses =
            file.get_count("sim.accesses_per_period", cfg.sim_accesses);
        if (cfg.sim_periods < 1 || cfg.sim_accesses < 1)
            throw ConfigError(path + ": [sim] counts must be >= 1");
        try {
            cfg.sim_policy = sim_policy_from_string(
                file.get_string("sim.policy", to_string(cfg.sim_policy)));
            cfg.sim_scheme = risk_scheme_from_string(
                file.get_string("sim.scheme", to_string(cfg.sim_scheme)));
        } catch (const std::invalid_argument& err) {
            throw ConfigError(path + ": [sim] " + err.what());
        }
        cfg.sim_fixed_k = file.get_double("sim.fixed_k", cfg.sim_fixed_k);

        cfg.out_path = file.get_string("output.path", cfg.out_path);
        cfg.seed = file.get_count("output.seed", cfg.seed);

        file.reject_unknown_keys();

        // the demand environment must be admissible as a whole
        try {
            const DemandEnvironment env(cfg.xi(), cfg.eps());
            (void)env;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& err) {
            throw ConfigError(path + ": demand environment: " + err.what());
        }
        return cfg;
    }
};

namespace detail {

inline SweepSpec resolve_sweep(const ExperimentConfig& cfg,
                               const std::string& expected, SweepSpec fallback) {
    if (!cfg.sweep) return fallback;
    if (cfg.sweep->variable != expected)
        throw ConfigError("sweep variable must be '" + expected + "', got '" +
                          cfg.sweep->variable + "'");
    return *cfg.sweep;
}

inline void write_row(std::ostream& out, const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out << ',';
        out << fmt9(values[i]);
    }
    out << '\n';
}

}  // namespace detail

enum class ProfitSelect { db, wsd, network };

inline ProfitSelect profit_select_from_string(const std::string& text) {
    if (text == "db") return ProfitSelect::db;
    if (text == "wsd") return ProfitSelect::wsd;
    if (text == "network") return ProfitSelect::network;
    throw ConfigError("unknown profit selector '" + text + "' (db|wsd|network)");
}

// Reservation levels of the four benchmark solutions across the scheduled
// demand range: xi,k_so,k_db_sym,k_db_asy,k_wsd.
inline void run_reserve_sweep(const ExperimentConfig& cfg, std::ostream& out) {
    const auto f = cfg.xi();
    const auto g = cfg.eps();
    const auto sweep = detail::resolve_sweep(
        cfg, "xi", SweepSpec{"xi", f.lower(), f.grid_upper(), 200});
    const double k_asy = k_db_asym(cfg.params, convolve(f, g));

    out << "xi,k_so,k_db_sym,k_db_asy,k_wsd\n";
    for (double xi : sweep.points())
        detail::write_row(out, {xi, k_centralized(xi, cfg.params, g),
                                k_db_sym(xi, cfg.params, g), k_asy,
                                k_wsd(xi, cfg.params, g)});
}

namespace detail {

struct SolutionProfits {
    double centralized;   // integrated benchmark (network profit)
    double s1_nosharing;
    double s1_contract;
    double s2_nosharing;
    double s2_contract;
};

// Expected profits of every solution at one parameter point. The centralized
// column always reports the integrated network profit; the other four report
// the selected party's share.
inline SolutionProfits solution_profits(const MarketParams& mp,
                                        const DemandDistribution& f,
                                        const DemandDistribution& g,
                                        const DemandDistribution& total,
                                        std::size_t grid_size, ProfitSelect select) {
    SolutionProfits profits{};
    profits.centralized = expected_network_profit_of_policy(
        [&](double xi) { return k_centralized(xi, mp, g); }, mp, f, g);

    const double k_asy = k_db_asym(mp, total);
    const auto menu1 = build_contract(RiskScheme::db_bearing, mp, f, g, grid_size);
    const auto menu2 = build_contract(RiskScheme::wsd_bearing, mp, f, g, grid_size);

    switch (select) {
        case ProfitSelect::db:
            profits.s1_nosharing = db_expected_profit_s1_asym(k_asy, mp, total);
            profits.s1_contract = db_expected_profit_under_menu(menu1, mp, f, g);
            profits.s2_nosharing =
                (mp.w - mp.c) *
                expect_over(f, [&](double xi) { return k_wsd(xi, mp, g); });
            profits.s2_contract = db_expected_profit_under_menu(menu2, mp, f, g);
            break;
        case ProfitSelect::wsd:
            profits.s1_nosharing =
                expect_over(f, [&](double xi) { return wsd_profit_s1(k_asy, xi, mp, g); });
            profits.s1_contract = expected_wsd_rent_under_menu(menu1, mp, f, g);
            profits.s2_nosharing = expect_over(f, [&](double xi) {
                return wsd_profit_s2(k_wsd(xi, mp, g), xi, mp, g);
            });
            profits.s2_contract = expected_wsd_rent_under_menu(menu2, mp, f, g);
            break;
        case ProfitSelect::network:
            profits.s1_nosharing = expected_network_profit_of_policy(
                [&](double) { return k_asy; }, mp, f, g);
            profits.s1_contract = expected_network_profit_under_menu(menu1, mp, f, g);
            profits.s2_nosharing = expected_network_profit_of_policy(
                [&](double xi) { return k_wsd(xi, mp, g); }, mp, f, g);
            profits.s2_contract = expected_network_profit_under_menu(menu2, mp, f, g);
            break;
    }
    return profits;
}

}  // namespace detail

// Selected profit of the five solutions across the wholesale price sweep.
inline void run_profit_sweep(const ExperimentConfig& cfg, ProfitSelect select,
                             std::ostream& out) {
    const auto f = cfg.xi();
    const auto g = cfg.eps();
    const auto sweep = detail::resolve_sweep(cfg, "w", SweepSpec{"w", 0.3, 0.7, 21});
    const auto total = convolve(f, g);  // w-independent

    out << "w,profit_centralized,profit_s1_nosharing,profit_s1_contract,"
           "profit_s2_nosharing,profit_s2_contract\n";
    for (double w : sweep.points()) {
        MarketParams mp = cfg.params;
        try {
            mp = cfg.params.with_wholesale(w);
        } catch (const std::invalid_argument& err) {
            throw ConfigError("profit-sweep: w=" + detail::fmt9(w) + ": " + err.what());
        }
        const auto profits = detail::solution_profits(mp, f, g, total,
                                                      cfg.contract_grid, select);
        detail::write_row(out, {w, profits.centralized, profits.s1_nosharing,
                                profits.s1_contract, profits.s2_nosharing,
                                profits.s2_contract});
    }
}

// Both optimal menus side by side with finite-difference marginal prices:
// xi,k_i,p_i,dpdk_i,k_ii,p_ii,dpdk_ii.
inline void run_contract_dump(const ExperimentConfig& cfg, std::ostream& out) {
    const auto f = cfg.xi();
    const auto g = cfg.eps();
    const auto menu1 =
        build_contract(RiskScheme::db_bearing, cfg.params, f, g, cfg.contract_grid);
    const auto menu2 =
        build_contract(RiskScheme::wsd_bearing, cfg.params, f, g, cfg.contract_grid);

    const auto slope_at = [](const ContractMenu& menu, std::size_t i) {
        const std::size_t j = std::max<std::size_t>(i, 1);
        const double dk = menu.k_values[j] - menu.k_values[j - 1];
        const double dp = menu.p_values[j] - menu.p_values[j - 1];
        return dk > 1e-12 ? dp / dk : 0.0;
    };

    out << "xi,k_i,p_i,dpdk_i,k_ii,p_ii,dpdk_ii\n";
    for (std::size_t i = 0; i < menu1.size(); ++i)
        detail::write_row(out, {menu1.xi_grid[i], menu1.k_values[i], menu1.p_values[i],
                                slope_at(menu1, i), menu2.k_values[i],
                                menu2.p_values[i], slope_at(menu2, i)});
}

// Selected profit of the five solutions as the scheduled-demand variance
// grows; the scheduled demand keeps its configured mean.
inline void run_variance_sweep(const ExperimentConfig& cfg, ProfitSelect select,
                               std::ostream& out) {
    if (cfg.xi_spec.kind != "truncated-normal")
        throw ConfigError(
            "variance-sweep: scheduled demand must be truncated-normal");
    const auto g = cfg.eps();
    const auto sweep =
        detail::resolve_sweep(cfg, "sigma2", SweepSpec{"sigma2", 16.0, 100.0, 22});

    out << "sigma2,profit_centralized,profit_s1_nosharing,profit_s1_contract,"
           "profit_s2_nosharing,profit_s2_contract\n";
    for (double sigma2 : sweep.points()) {
        if (!(sigma2 > 0.0))
            throw ConfigError("variance-sweep: sigma2 must be positive");
        const auto f =
            DemandDistribution::truncated_normal_4sigma(cfg.xi_spec.mean, sigma2);
        const auto total = convolve(f, g);
        const auto profits = detail::solution_profits(cfg.params, f, g, total,
                                                      cfg.contract_grid, select);
        detail::write_row(out, {sigma2, profits.centralized, profits.s1_nosharing,
                                profits.s1_contract, profits.s2_nosharing,
                                profits.s2_contract});
    }
}

// Broker profit with and without the pooled second-stage optimization over
// the fleet size: N,profit_without,profit_with,gain_pct. When a fleet file is
// given its prefixes are evaluated instead of sampled fleets.
inline void run_aggregate(const ExperimentConfig& cfg, std::ostream& out,
                          const std::string& fleet_path = "",
                          const std::string& details_path = "") {
    const auto f = DemandDistribution::truncated_normal_4sigma(cfg.agg_xi_mean,
                                                               cfg.agg_xi_variance);
    const auto g = DemandDistribution::chi_square(cfg.agg_eps_dof);
    const auto menu =
        build_contract(RiskScheme::db_bearing, cfg.params, f, g, cfg.contract_grid);

    std::vector<std::vector<double>> fleets;
    std::size_t n_max = cfg.agg_n_max;
    if (!fleet_path.empty()) {
        fleets.push_back(load_fleet_csv(fleet_path));
        n_max = fleets.front().size();
        for (double xi : fleets.front())
            if (xi < menu.xi_lo() || xi > menu.xi_hi())
                throw ConfigError("aggregate: fleet demand " + detail::fmt9(xi) +
                                  " outside the menu range");
    } else {
        // antithetic pairs: fleet 2p+1 mirrors fleet 2p's uniforms
        fleets.resize(cfg.agg_replications);
        for (std::size_t rep = 0; rep < fleets.size(); rep += 2) {
            std::mt19937_64 gen(num::derive_seed(cfg.seed, rep / 2));
            fleets[rep].resize(n_max);
            if (rep + 1 < fleets.size()) fleets[rep + 1].resize(n_max);
            for (std::size_t i = 0; i < n_max; ++i) {
                const double u = num::u01(gen);
                fleets[rep][i] = f.quantile(u);
                if (rep + 1 < fleets.size())
                    fleets[rep + 1][i] = f.quantile(1.0 - u);
            }
        }
    }

    const auto broker_profit_at = [&](double xi) {
        return network_profit(menu.k_at(xi), xi, cfg.params, g) -
               wsd_rent(menu.scheme, xi, menu, cfg.params, g);
    };

    std::vector<AggregateResultRow> details;
    out << "N,profit_without,profit_with,gain_pct\n";
    for (std::size_t n = 1; n <= n_max; ++n) {
        const auto pooled = pooled_bursty_dist(g, n);
        double without = 0.0, gain = 0.0, tk_mean = 0.0, otk_mean = 0.0;
        for (const auto& fleet : fleets) {
            double tk = 0.0, t_xi = 0.0, base = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                tk += menu.k_at(fleet[i]);
                t_xi += fleet[i];
                base += broker_profit_at(fleet[i]);
            }
            const auto sol =
                optimal_aggregate_reservation(tk, t_xi, pooled, cfg.params.c, cfg.agg_c_ex);
            without += base;
            gain += expected_incremental_profit(sol.otk, tk, t_xi, pooled, cfg.params.c,
                                                cfg.agg_c_ex);
            tk_mean += tk;
            otk_mean += sol.otk;
        }
        const auto reps = static_cast<double>(fleets.size());
        without /= reps;
        gain /= reps;
        detail::write_row(out, {static_cast<double>(n), without, without + gain,
                                100.0 * gain / without});
        details.push_back({n, tk_mean / reps, otk_mean / reps, gain});
    }
    if (!details_path.empty()) save_aggregate_results_csv(details, details_path);
}

// Monte Carlo run of the configured policy; emits the report CSV and an
// optional per-period trace.
inline void run_simulate(const ExperimentConfig& cfg, std::ostream& out,
                         const std::string& trace_path = "") {
    const auto f = cfg.xi();
    const auto g = cfg.eps();

    SimConfig sim;
    sim.n_reservation_periods = cfg.sim_periods;
    sim.accesses_per_period = cfg.sim_accesses;
    sim.seed = cfg.seed;
    sim.scheme = cfg.sim_scheme;
    sim.policy = cfg.sim_policy;
    sim.fixed_k = cfg.sim_fixed_k;

    ContractMenu menu;
    if (cfg.sim_policy == SimPolicy::menu) {
        menu = build_contract(cfg.sim_scheme, cfg.params, f, g, cfg.contract_grid);
        sim.menu = &menu;
    }

    std::vector<PeriodTrace> trace;
    std::vector<PeriodTrace>* trace_ptr = trace_path.empty() ? nullptr : &trace;
    const auto report = run_market(sim, cfg.params, f, g, trace_ptr);
    write_report_csv(report, out);
    if (!trace_path.empty()) {
        std::ofstream trace_out(trace_path);
        if (!trace_out)
            throw std::runtime_error("simulate: cannot open trace file " + trace_path);
        write_trace_csv(trace, trace_out);
    }
}

}  // namespace specres
