#pragma once

// Screening-menu construction for the broker: the profit-maximizing
// incentive-compatible reservation menus under both risk-bearing schemes,
// information-rent accounting, and a brute-force feasibility verifier.

#include "specres/distribution.hpp"
#include "specres/market.hpp"
#include "specres/math.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace specres {

// Raised when a reservation root-find cannot bracket its first-order
// condition; carries the offending scheduled demand in the message.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Discretized menu {<k(xi), p(xi)>} over an ascending scheduled-demand grid.
struct ContractMenu {
    RiskScheme scheme = RiskScheme::db_bearing;
    std::vector<double> xi_grid;
    std::vector<double> k_values;
    std::vector<double> p_values;
    double u_min = 0.0;

    std::size_t size() const { return xi_grid.size(); }
    double xi_lo() const { return xi_grid.front(); }
    double xi_hi() const { return xi_grid.back(); }

    void validate() const {
        if (xi_grid.empty() || k_values.size() != xi_grid.size() ||
            p_values.size() != xi_grid.size())
            throw std::invalid_argument("ContractMenu: inconsistent grids");
        for (std::size_t i = 1; i < xi_grid.size(); ++i)
            if (!(xi_grid[i] > xi_grid[i - 1]))
                throw std::invalid_argument("ContractMenu: xi grid must be ascending");
    }

    std::size_t segment_of(double xi) const {
        if (xi < xi_lo() - 1e-9 || xi > xi_hi() + 1e-9)
            throw std::invalid_argument("ContractMenu: xi outside the menu range");
        const auto it = std::upper_bound(xi_grid.begin(), xi_grid.end(), xi);
        const auto i = static_cast<std::size_t>(it - xi_grid.begin());
        return std::min(std::max<std::size_t>(i, 1) - 1, xi_grid.size() - 2);
    }

    double k_at(double xi) const { return interp(k_values, xi); }
    double p_at(double xi) const { return interp(p_values, xi); }

private:
    double interp(const std::vector<double>& values, double xi) const {
        if (xi_grid.size() == 1) {
            if (xi < xi_lo() - 1e-9 || xi > xi_hi() + 1e-9)
                throw std::invalid_argument("ContractMenu: xi outside the menu range");
            return values.front();
        }
        const std::size_t i = segment_of(xi);
        const double t = (xi - xi_grid[i]) / (xi_grid[i + 1] - xi_grid[i]);
        return values[i] + std::clamp(t, 0.0, 1.0) * (values[i + 1] - values[i]);
    }

public:

    // Drops items whose reservation duplicates the previous one (flat top of
    // the menu); needed before differentiating p with respect to k.
    ContractMenu collapse_duplicate_k(double eps = 1e-12) const {
        ContractMenu out;
        out.scheme = scheme;
        out.u_min = u_min;
        for (std::size_t i = 0; i < size(); ++i) {
            if (!out.k_values.empty() &&
                k_values[i] - out.k_values.back() <= eps * (1.0 + std::abs(k_values[i])))
                continue;
            out.xi_grid.push_back(xi_grid[i]);
            out.k_values.push_back(k_values[i]);
            out.p_values.push_back(p_values[i]);
        }
        return out;
    }
};

struct FeasibilityReport {
    double ic_max_violation = 0.0;  // worst gain from misreporting
    double ir_min_slack = 0.0;      // worst on-menu profit minus u_min
    bool monotonicity_ok = true;
    bool feasible = false;
};

// Rent slope coefficient: (s - w) when the broker bears the risk, s when the
// buyer does.
inline double rent_coefficient(RiskScheme scheme, const MarketParams& mp) {
    return scheme == RiskScheme::db_bearing ? mp.s - mp.w : mp.s;
}

// Expected gross WSD revenue of operating item k at demand xi, before the
// reservation fee.
inline double wsd_gross_profit(RiskScheme scheme, double k, double xi,
                               const MarketParams& mp, const DemandDistribution& g) {
    if (scheme == RiskScheme::db_bearing) return wsd_profit_s1(k, xi, mp, g);
    return wsd_profit_s2(k, xi, mp, g);
}

// Expected WSD profit when a type-xi buyer takes item <k, p>.
inline double wsd_profit_menu(RiskScheme scheme, double k, double p, double xi,
                              const MarketParams& mp, const DemandDistribution& g) {
    return wsd_gross_profit(scheme, k, xi, mp, g) - p;
}

namespace detail {

inline constexpr double pdf_floor = 1e-12;

// Inverse hazard weight (1 - F(xi)) / f(xi). Where both numerator and
// denominator vanish at the top type, steps slightly inside for a one-sided
// estimate of the limit.
inline double ir_weight(const DemandDistribution& f, double xi) {
    double density = f.pdf(xi);
    double survival = 1.0 - f.cdf(xi);
    if (density >= pdf_floor) return std::max(survival, 0.0) / density;
    if (survival < 1e-9) {
        const double step = (f.grid_upper() - f.lower()) * 1e-6;
        const double inside = xi - step;
        density = f.pdf(inside);
        survival = 1.0 - f.cdf(inside);
        if (density >= pdf_floor) return std::max(survival, 0.0) / density;
    }
    throw std::domain_error("ir_weight: density below floor at xi=" + std::to_string(xi));
}

}  // namespace detail

// Virtual surplus: total surplus minus the hazard-weighted rent derivative.
inline double phi(RiskScheme scheme, double k, double xi, const MarketParams& mp,
                  const DemandDistribution& f, const DemandDistribution& g) {
    const double weight = detail::ir_weight(f, xi);
    const double alpha = rent_coefficient(scheme, mp);
    return network_profit(k, xi, mp, g) -
           weight * (mp.r - mp.s + alpha * g.cdf(k - xi));
}

// Unique maximizer of the virtual surplus in k >= xi: root of
//   s [1 - G(z)] - c - ((1-F)/f) alpha g(z) = 0,   z = k - xi,
// bracketed by a 512-point scan and bisected to |dz| < 1e-9.
inline double solve_k_star(RiskScheme scheme, double xi, const MarketParams& mp,
                           const DemandDistribution& f, const DemandDistribution& g) {
    const double weight = detail::ir_weight(f, xi);
    const double alpha = rent_coefficient(scheme, mp);
    const auto foc = [&](double z) {
        return mp.s * (1.0 - g.cdf(z)) - mp.c - weight * alpha * g.pdf(z);
    };

    const double z_cap = g.grid_upper();
    const std::size_t scan_points = 512;
    const double step = z_cap / static_cast<double>(scan_points);

    double z_prev = 0.0;
    double f_prev = foc(0.0);
    if (f_prev <= 0.0) return xi;  // surplus already decreasing at zero headroom
    for (std::size_t i = 1; i <= scan_points; ++i) {
        const double z = step * static_cast<double>(i);
        const double fz = foc(z);
        if (fz <= 0.0)
            return xi + num::bisect(foc, z_prev, z, f_prev, fz, 1e-9);
        z_prev = z;
        f_prev = fz;
    }
    throw SolverError("solve_k_star: no sign change on the z scan at xi=" +
                      std::to_string(xi));
}

namespace detail {

// Simpson value of int_{a}^{b} alpha G(k(x) - x) dx with k linear on [a, b].
inline double rent_segment(double a, double ka, double b, double kb, double alpha,
                           const DemandDistribution& g) {
    const double m = 0.5 * (a + b);
    const double km = 0.5 * (ka + kb);
    const double qa = g.cdf(ka - a);
    const double qm = g.cdf(km - m);
    const double qb = g.cdf(kb - b);
    return alpha * (b - a) / 6.0 * (qa + 4.0 * qm + qb);
}

// Cumulative information rent at every grid node:
// U(xi) = u_min + (r-s)(xi - xi_lo) + int alpha G(k(x) - x) dx.
inline std::vector<double> rent_profile(RiskScheme scheme,
                                        const std::vector<double>& xi_grid,
                                        const std::vector<double>& k_values,
                                        double u_min, const MarketParams& mp,
                                        const DemandDistribution& g) {
    const double alpha = rent_coefficient(scheme, mp);
    std::vector<double> rent(xi_grid.size());
    rent[0] = u_min;
    for (std::size_t i = 0; i + 1 < xi_grid.size(); ++i) {
        const double h = xi_grid[i + 1] - xi_grid[i];
        rent[i + 1] = rent[i] + (mp.r - mp.s) * h +
                      rent_segment(xi_grid[i], k_values[i], xi_grid[i + 1],
                                   k_values[i + 1], alpha, g);
    }
    return rent;
}

}  // namespace detail

// Information rent of type xi given a tabulated nondecreasing menu k(.).
inline double wsd_rent(RiskScheme scheme, double xi, const std::vector<double>& xi_grid,
                       const std::vector<double>& k_values, double u_min,
                       const MarketParams& mp, const DemandDistribution& g) {
    if (xi_grid.size() < 2 || xi_grid.size() != k_values.size())
        throw std::invalid_argument("wsd_rent: inconsistent menu grid");
    if (xi < xi_grid.front() - 1e-9 || xi > xi_grid.back() + 1e-9)
        throw std::invalid_argument("wsd_rent: xi outside the menu range");
    xi = std::clamp(xi, xi_grid.front(), xi_grid.back());

    const double alpha = rent_coefficient(scheme, mp);
    double rent = u_min;
    for (std::size_t i = 0; i + 1 < xi_grid.size(); ++i) {
        if (xi >= xi_grid[i + 1]) {
            rent += (mp.r - mp.s) * (xi_grid[i + 1] - xi_grid[i]) +
                    detail::rent_segment(xi_grid[i], k_values[i], xi_grid[i + 1],
                                         k_values[i + 1], alpha, g);
            continue;
        }
        if (xi > xi_grid[i]) {
            const double t = (xi - xi_grid[i]) / (xi_grid[i + 1] - xi_grid[i]);
            const double k_xi = k_values[i] + t * (k_values[i + 1] - k_values[i]);
            rent += (mp.r - mp.s) * (xi - xi_grid[i]) +
                    detail::rent_segment(xi_grid[i], k_values[i], xi, k_xi, alpha, g);
        }
        break;
    }
    return rent;
}

inline double wsd_rent(RiskScheme scheme, double xi, const ContractMenu& menu,
                       const MarketParams& mp, const DemandDistribution& g) {
    return wsd_rent(scheme, xi, menu.xi_grid, menu.k_values, menu.u_min, mp, g);
}

// Reservation fee leaving the buyer exactly its rent: p = gross - rent.
inline double payment(RiskScheme scheme, double xi, double k, double rent,
                      const MarketParams& mp, const DemandDistribution& g) {
    return wsd_gross_profit(scheme, k, xi, mp, g) - rent;
}

// Optimal menu: k from the virtual-surplus first-order condition at every
// grid node, p from the rent integral anchored at U(xi_lo) = u_min.
inline ContractMenu build_contract(RiskScheme scheme, const MarketParams& mp,
                                   const DemandDistribution& f,
                                   const DemandDistribution& g,
                                   std::size_t grid_size = 200) {
    if (grid_size < 2)
        throw std::invalid_argument("build_contract: grid_size must be >= 2");
    if (!f.is_ifr())
        throw std::invalid_argument("build_contract: scheduled demand must be IFR");

    ContractMenu menu;
    menu.scheme = scheme;
    menu.u_min = mp.u_min;
    menu.xi_grid.resize(grid_size);
    menu.k_values.resize(grid_size);
    const double lo = f.lower();
    const double hi = f.grid_upper();
    for (std::size_t i = 0; i < grid_size; ++i)
        menu.xi_grid[i] =
            lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_size - 1);

    num::parallel_for(grid_size, [&](std::size_t i) {
        menu.k_values[i] = solve_k_star(scheme, menu.xi_grid[i], mp, f, g);
    });

    // IFR guarantees a nondecreasing k; absorb root-tolerance wiggles only.
    for (std::size_t i = 1; i < grid_size; ++i) {
        if (menu.k_values[i] < menu.k_values[i - 1] - 1e-6)
            throw SolverError("build_contract: reservation decreases at xi=" +
                              std::to_string(menu.xi_grid[i]));
        menu.k_values[i] = std::max(menu.k_values[i], menu.k_values[i - 1]);
    }

    const auto rents =
        detail::rent_profile(scheme, menu.xi_grid, menu.k_values, menu.u_min, mp, g);
    menu.p_values.resize(grid_size);
    for (std::size_t i = 0; i < grid_size; ++i)
        menu.p_values[i] =
            payment(scheme, menu.xi_grid[i], menu.k_values[i], rents[i], mp, g);
    return menu;
}

// Brute force over all (true type, reported type) pairs on the menu grid.
inline FeasibilityReport verify_feasibility(const ContractMenu& menu,
                                            const MarketParams& mp,
                                            const DemandDistribution& g,
                                            double tol = 1e-6) {
    menu.validate();
    const std::size_t n = menu.size();

    std::vector<double> profit(n * n);
    num::parallel_for(n, [&](std::size_t j) {
        // column j: every true type evaluating the item intended for type j
        for (std::size_t i = 0; i < n; ++i)
            profit[i * n + j] = wsd_profit_menu(menu.scheme, menu.k_values[j],
                                                menu.p_values[j], menu.xi_grid[i], mp, g);
    });

    FeasibilityReport report;
    report.ic_max_violation = 0.0;
    report.ir_min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double own = profit[i * n + i];
        report.ir_min_slack = std::min(report.ir_min_slack, own - menu.u_min);
        for (std::size_t j = 0; j < n; ++j)
            report.ic_max_violation =
                std::max(report.ic_max_violation, profit[i * n + j] - own);
    }
    report.monotonicity_ok = true;
    for (std::size_t i = 1; i < n; ++i)
        if (menu.k_values[i] < menu.k_values[i - 1] -
                                   1e-9 * (1.0 + std::abs(menu.k_values[i - 1])))
            report.monotonicity_ok = false;
    report.feasible = report.ic_max_violation <= tol &&
                      report.ir_min_slack >= -tol && report.monotonicity_ok;
    return report;
}

namespace detail {

// Composite Simpson over the menu segments of fn(xi, k(xi), rent(xi)),
// weighted by the scheduled-demand density. Midpoint rents come from the
// same cumulative rule at half resolution.
template <typename Fn>
double integrate_menu(const ContractMenu& menu, const MarketParams& mp,
                      const DemandDistribution& f, const DemandDistribution& g,
                      Fn&& fn) {
    const double alpha = rent_coefficient(menu.scheme, mp);
    const auto rents =
        rent_profile(menu.scheme, menu.xi_grid, menu.k_values, menu.u_min, mp, g);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < menu.size(); ++i) {
        const double a = menu.xi_grid[i], b = menu.xi_grid[i + 1];
        const double m = 0.5 * (a + b);
        const double ka = menu.k_values[i], kb = menu.k_values[i + 1];
        const double km = 0.5 * (ka + kb);
        const double rent_m = rents[i] + (mp.r - mp.s) * (m - a) +
                              rent_segment(a, ka, m, km, alpha, g);
        const double fa = f.pdf(a) * fn(a, ka, rents[i]);
        const double fm = f.pdf(m) * fn(m, km, rent_m);
        const double fb = f.pdf(b) * fn(b, kb, rents[i + 1]);
        total += (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    }
    return total;
}

}  // namespace detail

// E_xi of the broker profit at the xi item: total surplus minus the rent.
inline double db_expected_profit_under_menu(const ContractMenu& menu,
                                            const MarketParams& mp,
                                            const DemandDistribution& f,
                                            const DemandDistribution& g) {
    return detail::integrate_menu(menu, mp, f, g, [&](double xi, double k, double rent) {
        return network_profit(k, xi, mp, g) - rent;
    });
}

// Same quantity through the virtual-surplus reformulation E_xi[phi] - u_min.
inline double db_expected_profit_via_surplus(const ContractMenu& menu,
                                             const MarketParams& mp,
                                             const DemandDistribution& f,
                                             const DemandDistribution& g) {
    return detail::integrate_menu(menu, mp, f, g,
                                  [&](double xi, double k, double) {
                                      return phi(menu.scheme, k, xi, mp, f, g);
                                  }) -
           menu.u_min;
}

inline double expected_wsd_rent_under_menu(const ContractMenu& menu,
                                           const MarketParams& mp,
                                           const DemandDistribution& f,
                                           const DemandDistribution& g) {
    return detail::integrate_menu(menu, mp, f, g,
                                  [](double, double, double rent) { return rent; });
}

inline double expected_network_profit_under_menu(const ContractMenu& menu,
                                                 const MarketParams& mp,
                                                 const DemandDistribution& f,
                                                 const DemandDistribution& g) {
    return detail::integrate_menu(menu, mp, f, g, [&](double xi, double k, double) {
        return network_profit(k, xi, mp, g);
    });
}

// Finite-difference marginal price dP/dK between consecutive distinct items,
// reported at the midpoint reservation.
inline std::vector<std::pair<double, double>> marginal_price_curve(
    const ContractMenu& menu) {
    menu.validate();
    if (menu.size() < 3)
        throw std::invalid_argument("marginal_price_curve: needs >= 3 grid nodes");
    std::vector<std::pair<double, double>> curve;
    curve.reserve(menu.size() - 1);
    for (std::size_t i = 1; i < menu.size(); ++i) {
        const double dk = menu.k_values[i] - menu.k_values[i - 1];
        if (std::abs(dk) <= 1e-12 * (1.0 + std::abs(menu.k_values[i])))
            throw std::invalid_argument(
                "marginal_price_curve: duplicate k values; collapse duplicates first");
        const double dp = menu.p_values[i] - menu.p_values[i - 1];
        curve.emplace_back(0.5 * (menu.k_values[i] + menu.k_values[i - 1]), dp / dk);
    }
    return curve;
}

// --- CSV persistence: "xi,k,p" rows plus a flat key=value sidecar ---------

inline void save_menu_csv(const ContractMenu& menu, const MarketParams& mp,
                          const DemandDistribution& f, const DemandDistribution& g,
                          const std::string& path) {
    menu.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_menu_csv: cannot open " + path);
    out << "xi,k,p\n";
    char buf[96];
    for (std::size_t i = 0; i < menu.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g", menu.xi_grid[i],
                      menu.k_values[i], menu.p_values[i]);
        out << buf << '\n';
    }

    std::ofstream meta(path + ".meta");
    if (!meta) throw std::runtime_error("save_menu_csv: cannot open " + path + ".meta");
    meta << "scheme=" << to_string(menu.scheme) << '\n';
    meta << "u_min=" << menu.u_min << '\n';
    meta << "r=" << mp.r << '\n' << "s=" << mp.s << '\n';
    meta << "w=" << mp.w << '\n' << "c=" << mp.c << '\n';
    meta << "xi_dist=" << f.describe() << '\n';
    meta << "eps_dist=" << g.describe() << '\n';
}

inline ContractMenu load_menu_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_menu_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "xi,k,p")
        throw std::runtime_error("load_menu_csv: expected header 'xi,k,p' in " + path);

    ContractMenu menu;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw std::runtime_error("load_menu_csv: malformed row '" + line + "'");
        menu.xi_grid.push_back(std::stod(line.substr(0, c1)));
        menu.k_values.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
        menu.p_values.push_back(std::stod(line.substr(c2 + 1)));
    }

    std::ifstream meta(path + ".meta");
    if (!meta) throw std::runtime_error("load_menu_csv: missing sidecar " + path + ".meta");
    std::map<std::string, std::string> kv;
    while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (!kv.count("scheme") || !kv.count("u_min"))
        throw std::runtime_error("load_menu_csv: sidecar lacks scheme/u_min");
    menu.scheme = risk_scheme_from_string(kv["scheme"]);
    menu.u_min = std::stod(kv["u_min"]);
    menu.validate();
    return menu;
}

}  // namespace specres
