#pragma once

// Monte Carlo realization of the two-timescale market protocol: scheduled
// demand is drawn once per reservation period and fixes the reservation
// through the chosen policy; bursty demand is redrawn every access period and
// trades settle at realized volumes. Used to validate every analytic
// expectation in the library.

#include "specres/contract.hpp"
#include "specres/distribution.hpp"
#include "specres/market.hpp"
#include "specres/math.hpp"

#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace specres {

enum class SimPolicy { fixed_k, menu, centralized, db_sym, db_asym, wsd_opt };

inline const char* to_string(SimPolicy policy) {
    switch (policy) {
        case SimPolicy::fixed_k: return "fixed-k";
        case SimPolicy::menu: return "menu";
        case SimPolicy::centralized: return "centralized";
        case SimPolicy::db_sym: return "db-sym";
        case SimPolicy::db_asym: return "db-asym";
        case SimPolicy::wsd_opt: return "wsd-opt";
    }
    return "?";
}

inline SimPolicy sim_policy_from_string(const std::string& text) {
    if (text == "fixed-k") return SimPolicy::fixed_k;
    if (text == "menu") return SimPolicy::menu;
    if (text == "centralized") return SimPolicy::centralized;
    if (text == "db-sym") return SimPolicy::db_sym;
    if (text == "db-asym") return SimPolicy::db_asym;
    if (text == "wsd-opt") return SimPolicy::wsd_opt;
    throw std::invalid_argument("unknown sim policy: " + text);
}

struct SimConfig {
    std::size_t n_reservation_periods = 1;
    std::size_t accesses_per_period = 1;
    std::uint64_t seed = 0;
    RiskScheme scheme = RiskScheme::db_bearing;
    SimPolicy policy = SimPolicy::centralized;
    double fixed_k = 0.0;                    // used by the fixed-k policy
    const ContractMenu* menu = nullptr;      // required by the menu policy
    // Fidelity mode: draw bursty demand from per-user channel realizations
    // instead of sampling G directly.
    std::optional<RandomUserModel> user_model;
    std::size_t users_per_access = 0;
};

// Realized per-access-period profit means with standard errors.
struct SimulationReport {
    double db_profit_mean = 0.0;
    double wsd_profit_mean = 0.0;
    double network_profit_mean = 0.0;
    double db_profit_se = 0.0;
    double wsd_profit_se = 0.0;
    double network_profit_se = 0.0;
    std::size_t n_samples = 0;  // total access periods
};

enum class SimField { db, wsd, network };

struct PeriodTrace {
    std::size_t period;
    double xi;
    double k;
    double db_profit;   // per access period, averaged within the period
    double wsd_profit;
};

// Subscriber traffic is served first; random users get the remaining
// headroom. Returns (subscriber revenue, random-user revenue).
inline std::pair<double, double> serve_users(double k, double xi, double eps,
                                             const MarketParams& mp) {
    const double headroom = std::max(k - xi, 0.0);
    return {mp.r * std::min(k, xi), mp.s * std::min(eps, headroom)};
}

namespace detail {

inline double batch_se(const std::vector<double>& period_means) {
    const auto n = static_cast<double>(period_means.size());
    double mean = 0.0;
    for (double v : period_means) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : period_means) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / (n - 1.0) / n);
}

}  // namespace detail

inline SimulationReport run_market(const SimConfig& config, const MarketParams& mp,
                                   const DemandDistribution& f,
                                   const DemandDistribution& g,
                                   std::vector<PeriodTrace>* trace = nullptr) {
    if (config.n_reservation_periods < 1 || config.accesses_per_period < 1)
        throw std::invalid_argument("run_market: counts must be >= 1");
    if (config.policy == SimPolicy::menu) {
        if (config.menu == nullptr)
            throw std::invalid_argument("run_market: menu policy needs a menu");
        if (config.menu->scheme != config.scheme)
            throw std::invalid_argument("run_market: menu scheme does not match config");
    }
    if (config.user_model && config.users_per_access == 0)
        throw std::invalid_argument("run_market: user-level mode needs users_per_access");

    // policy constants shared by every reservation period
    const double q_centralized = g.quantile((mp.s - mp.c) / mp.s);
    const double q_db_sym = g.quantile((mp.w - mp.c) / mp.w);
    const double q_wsd = g.quantile((mp.s - mp.w) / mp.s);
    double k_asym = 0.0;
    if (config.policy == SimPolicy::db_asym) k_asym = k_db_asym(mp, f, g);

    const std::size_t periods = config.n_reservation_periods;
    const std::size_t accesses = config.accesses_per_period;
    std::vector<double> db_means(periods), wsd_means(periods), net_means(periods);
    std::vector<double> xis(periods), ks(periods);

    double access_ss_db = 0.0, access_ss_wsd = 0.0, access_ss_net = 0.0;

    for (std::size_t period = 0; period < periods; ++period) {
        std::mt19937_64 gen(num::derive_seed(config.seed, period));
        const double xi = f.quantile(num::u01(gen));

        double k = 0.0, fee = 0.0;
        switch (config.policy) {
            case SimPolicy::fixed_k: k = config.fixed_k; break;
            case SimPolicy::centralized: k = xi + q_centralized; break;
            case SimPolicy::db_sym: k = xi + q_db_sym; break;
            case SimPolicy::db_asym: k = k_asym; break;
            case SimPolicy::wsd_opt: k = xi + q_wsd; break;
            case SimPolicy::menu: {
                // the buyer picks the expected-profit-maximizing item
                const ContractMenu& menu = *config.menu;
                std::size_t best = 0;
                double best_profit = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < menu.size(); ++j) {
                    const double u = wsd_profit_menu(config.scheme, menu.k_values[j],
                                                     menu.p_values[j], xi, mp, g);
                    if (u > best_profit) {
                        best_profit = u;
                        best = j;
                    }
                }
                k = menu.k_values[best];
                fee = menu.p_values[best];
                break;
            }
        }

        double db_sum = 0.0, wsd_sum = 0.0, net_sum = 0.0;
        double db_sq = 0.0, wsd_sq = 0.0, net_sq = 0.0;
        for (std::size_t access = 0; access < accesses; ++access) {
            const double eps =
                config.user_model
                    ? random_user_demand_draw(*config.user_model, gen,
                                              config.users_per_access)
                    : g.quantile(num::u01(gen));
            const auto [sub_rev, rand_rev] = serve_users(k, xi, eps, mp);
            const double network = sub_rev + rand_rev - mp.c * k;
            const double wholesale = config.scheme == RiskScheme::db_bearing
                                         ? mp.w * std::min(k, xi + eps)
                                         : mp.w * k;
            const double wsd = sub_rev + rand_rev - wholesale - fee;
            const double db = network - wsd;
            db_sum += db;
            wsd_sum += wsd;
            net_sum += network;
            db_sq += db * db;
            wsd_sq += wsd * wsd;
            net_sq += network * network;
        }
        const auto t = static_cast<double>(accesses);
        db_means[period] = db_sum / t;
        wsd_means[period] = wsd_sum / t;
        net_means[period] = net_sum / t;
        xis[period] = xi;
        ks[period] = k;
        access_ss_db += db_sq - db_sum * db_sum / t;
        access_ss_wsd += wsd_sq - wsd_sum * wsd_sum / t;
        access_ss_net += net_sq - net_sum * net_sum / t;
    }

    SimulationReport report;
    report.n_samples = periods * accesses;
    for (std::size_t period = 0; period < periods; ++period) {
        report.db_profit_mean += db_means[period];
        report.wsd_profit_mean += wsd_means[period];
        report.network_profit_mean += net_means[period];
    }
    report.db_profit_mean /= static_cast<double>(periods);
    report.wsd_profit_mean /= static_cast<double>(periods);
    report.network_profit_mean /= static_cast<double>(periods);

    if (periods > 1) {
        // reservation periods are i.i.d.; batching absorbs the xi-level variance
        report.db_profit_se = detail::batch_se(db_means);
        report.wsd_profit_se = detail::batch_se(wsd_means);
        report.network_profit_se = detail::batch_se(net_means);
    } else {
        const auto n = static_cast<double>(report.n_samples);
        report.db_profit_se = std::sqrt(std::max(access_ss_db, 0.0) / (n - 1.0) / n);
        report.wsd_profit_se = std::sqrt(std::max(access_ss_wsd, 0.0) / (n - 1.0) / n);
        report.network_profit_se = std::sqrt(std::max(access_ss_net, 0.0) / (n - 1.0) / n);
    }

    if (trace != nullptr) {
        trace->clear();
        trace->reserve(periods);
        for (std::size_t period = 0; period < periods; ++period)
            trace->push_back({period, xis[period], ks[period], db_means[period],
                              wsd_means[period]});
    }
    return report;
}

// True iff the realized mean is within three standard errors of the analytic
// value. Requires at least 100 samples.
inline bool validate_against_analytic(const SimulationReport& report, double analytic,
                                      SimField which) {
    if (report.n_samples < 100)
        throw std::invalid_argument("validate_against_analytic: needs >= 100 samples");
    double mean = 0.0, se = 0.0;
    switch (which) {
        case SimField::db: mean = report.db_profit_mean; se = report.db_profit_se; break;
        case SimField::wsd: mean = report.wsd_profit_mean; se = report.wsd_profit_se; break;
        case SimField::network:
            mean = report.network_profit_mean;
            se = report.network_profit_se;
            break;
    }
    return std::abs(mean - analytic) <= 3.0 * se;
}

// --- CSV emission ----------------------------------------------------------

inline void write_report_csv(const SimulationReport& report, std::ostream& out) {
    char buf[128];
    out << "field,mean,se,n\n";
    const auto row = [&](const char* field, double mean, double se) {
        std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%zu", field, mean, se,
                      report.n_samples);
        out << buf << '\n';
    };
    row("db_profit", report.db_profit_mean, report.db_profit_se);
    row("wsd_profit", report.wsd_profit_mean, report.wsd_profit_se);
    row("network_profit", report.network_profit_mean, report.network_profit_se);
}

inline void write_trace_csv(const std::vector<PeriodTrace>& trace, std::ostream& out) {
    char buf[160];
    out << "period,xi,k,db_profit,wsd_profit\n";
    for (const auto& row : trace) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g", row.period, row.xi,
                      row.k, row.db_profit, row.wsd_profit);
        out << buf << '\n';
    }
}

}  // namespace specres
