#pragma once

// Broker-side second stage: after co-located buyers pick their menu items,
// the broker may trim the pooled reservation, trading reservation savings
// against a replenishment premium on demand overshoot.

#include "specres/contract.hpp"
#include "specres/distribution.hpp"
#include "specres/math.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace specres {

// A set of co-located buyers with realized scheduled demands, the broker's
// cost structure, and the per-buyer bursty demand distribution.
struct FleetConfig {
    std::vector<double> xi_values;
    double c;                            // reservation cost per unit bandwidth
    double c_ex;                         // replenishment cost per unit bandwidth
    DemandDistribution eps_dist_single;  // per-buyer bursty demand

    FleetConfig(std::vector<double> xi_values_, double c_, double c_ex_,
                DemandDistribution eps_single)
        : xi_values(std::move(xi_values_)), c(c_), c_ex(c_ex_),
          eps_dist_single(std::move(eps_single)) {
        if (!(c_ex > c && c > 0.0))
            throw std::invalid_argument("FleetConfig: requires c_ex > c > 0");
        if (xi_values.empty())
            throw std::invalid_argument("FleetConfig: needs at least one buyer");
        for (double xi : xi_values)
            if (xi < 0.0)
                throw std::invalid_argument("FleetConfig: demands must be nonnegative");
    }
};

// Total reservation requested by the fleet: sum of interpolated menu items.
// Rejects demands outside the menu range.
inline double aggregate_requests(const ContractMenu& menu,
                                 const std::vector<double>& xi_values) {
    double total = 0.0;
    for (double xi : xi_values) total += menu.k_at(xi);
    return total;
}

// Distribution of the pooled bursty demand of n_wsds i.i.d. buyers.
// Chi-square pools exactly (dof adds); other kinds are convolved.
inline DemandDistribution pooled_bursty_dist(const DemandDistribution& g,
                                             std::size_t n_wsds) {
    if (n_wsds < 1)
        throw std::invalid_argument("pooled_bursty_dist: needs n_wsds >= 1");
    if (n_wsds == 1) return g;
    if (g.kind() == DistKind::chi_square)
        return DemandDistribution::chi_square(static_cast<double>(n_wsds) * g.mean());
    DemandDistribution pooled = convolve(g, g);
    for (std::size_t i = 2; i < n_wsds; ++i) pooled = convolve(pooled, g);
    return pooled;
}

// Expected profit increment from trimming the pooled reservation tk down to
// otk, given total scheduled demand t_xi and pooled bursty demand H:
//   c (tk-otk) H(otk-t_xi)
//   - c_ex int_{otk-t_xi}^{tk-t_xi} (t + t_xi - otk) h(t) dt
//   - c_ex (tk-otk) (1 - H(tk-t_xi)).
inline double expected_incremental_profit(double otk, double tk, double t_xi,
                                          const DemandDistribution& pooled, double c,
                                          double c_ex) {
    if (otk > tk)
        throw std::invalid_argument("expected_incremental_profit: otk must not exceed tk");
    if (otk == tk) return 0.0;
    const double x0 = otk - t_xi;
    const double y0 = tk - t_xi;
    const double trimmed = tk - otk;

    double middle;
    if (pooled.kind() == DistKind::point_mass) {
        const double eps0 = pooled.lower();
        middle = (eps0 >= x0 && eps0 <= y0) ? (eps0 - x0) : 0.0;
    } else {
        const double a = std::max(x0, pooled.lower());
        const double b = std::min(y0, pooled.grid_upper());
        middle = num::integrate(
            [&](double t) { return (t - x0) * pooled.pdf(t); }, a, b, 1e-8);
    }

    return c * trimmed * pooled.cdf(x0) - c_ex * middle -
           c_ex * trimmed * (1.0 - pooled.cdf(y0));
}

struct AggregateSolution {
    double otk = 0.0;
    bool at_boundary = false;  // no interior stationary point; endpoint returned
};

// Maximizer of the incremental profit on [t_xi, tk]: root of
//   c_ex + c (tk-otk) h(otk-t_xi) - (c+c_ex) H(otk-t_xi) = 0.
// The pooled density may be non-monotone, so every bracketed root is
// evaluated and the best kept.
inline AggregateSolution optimal_aggregate_reservation(double tk, double t_xi,
                                                       const DemandDistribution& pooled,
                                                       double c, double c_ex) {
    if (!(c_ex > c))
        throw std::invalid_argument("optimal_aggregate_reservation: requires c_ex > c");
    if (!(tk >= t_xi))
        throw std::invalid_argument("optimal_aggregate_reservation: requires tk >= t_xi");

    const auto foc = [&](double otk) {
        const double x = otk - t_xi;
        return c_ex + c * (tk - otk) * pooled.pdf(x) - (c + c_ex) * pooled.cdf(x);
    };
    const auto profit = [&](double otk) {
        return expected_incremental_profit(otk, tk, t_xi, pooled, c, c_ex);
    };

    AggregateSolution best;
    best.otk = profit(t_xi) >= 0.0 ? t_xi : tk;
    best.at_boundary = true;
    double best_profit = std::max(profit(t_xi), 0.0);  // otk = tk gives exactly 0

    const std::size_t scan_points = 512;
    double prev_otk = t_xi;
    double prev_foc = foc(t_xi);
    for (std::size_t i = 1; i <= scan_points; ++i) {
        const double otk =
            t_xi + (tk - t_xi) * static_cast<double>(i) / static_cast<double>(scan_points);
        const double f_otk = foc(otk);
        if ((f_otk > 0.0) != (prev_foc > 0.0)) {
            const double root = num::bisect(foc, prev_otk, otk, prev_foc, f_otk, 1e-9);
            const double value = profit(root);
            if (value > best_profit) {
                best_profit = value;
                best.otk = root;
                best.at_boundary = false;
            }
        }
        prev_otk = otk;
        prev_foc = f_otk;
    }
    return best;
}

// Under the buyer-bearing-risk scheme there is no second stage: the broker
// reserves exactly the summed requests.
inline double aggregate_scheme2(const ContractMenu& menu,
                                const std::vector<double>& xi_values) {
    if (menu.scheme != RiskScheme::wsd_bearing)
        throw std::invalid_argument("aggregate_scheme2: menu must be wsd-bearing-risk");
    return aggregate_requests(menu, xi_values);
}

// --- CSV interfaces --------------------------------------------------------

// Fleet scenario file: header "wsd_id,xi", one row per buyer.
inline std::vector<double> load_fleet_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_fleet_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "wsd_id,xi")
        throw std::runtime_error("load_fleet_csv: expected header 'wsd_id,xi' in " + path);
    std::vector<double> xi_values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("load_fleet_csv: " + path + ":" +
                                     std::to_string(line_no) + ": missing comma");
        xi_values.push_back(std::stod(line.substr(comma + 1)));
    }
    if (xi_values.empty())
        throw std::runtime_error("load_fleet_csv: no rows in " + path);
    return xi_values;
}

struct AggregateResultRow {
    std::size_t n_wsds;
    double tk;
    double otk_star;
    double profit_gain;
};

inline void save_aggregate_results_csv(const std::vector<AggregateResultRow>& rows,
                                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_aggregate_results_csv: cannot open " + path);
    out << "N,TK,OTK_star,profit_gain\n";
    char buf[128];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g", row.n_wsds, row.tk,
                      row.otk_star, row.profit_gain);
        out << buf << '\n';
    }
}

}  // namespace specres
