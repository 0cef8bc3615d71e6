#pragma once

// Benchmark profit evaluators and closed-form reservation solvers: the
// centralized system and both no-sharing decentralized regimes, under either
// risk-bearing scheme. Pure functions over immutable inputs.

#include "specres/distribution.hpp"
#include "specres/math.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace specres {

// Fixed trading prices plus the WSD's minimum acceptance profit.
struct MarketParams {
    double r;      // subscriber price per unit bandwidth
    double s;      // random-user price per unit bandwidth
    double w;      // wholesale price per unit bandwidth
    double c;      // broker reservation cost per unit bandwidth
    double u_min;  // WSD outside option per access period

    MarketParams(double r_, double s_, double w_, double c_, double u_min_ = 0.0)
        : r(r_), s(s_), w(w_), c(c_), u_min(u_min_) {
        if (!(r > s && s > w && w > c && c > 0.0))
            throw std::invalid_argument("MarketParams: requires r > s > w > c > 0");
        if (u_min < 0.0)
            throw std::invalid_argument("MarketParams: u_min must be nonnegative");
    }

    MarketParams with_wholesale(double new_w) const {
        return MarketParams(r, s, new_w, c, u_min);
    }
};

enum class RiskScheme { db_bearing, wsd_bearing };

inline const char* to_string(RiskScheme scheme) {
    return scheme == RiskScheme::db_bearing ? "db-bearing-risk" : "wsd-bearing-risk";
}

inline RiskScheme risk_scheme_from_string(const std::string& text) {
    if (text == "db-bearing-risk") return RiskScheme::db_bearing;
    if (text == "wsd-bearing-risk") return RiskScheme::wsd_bearing;
    throw std::invalid_argument("unknown risk scheme: " + text);
}

// Scheduled-demand distribution F paired with bursty-demand distribution G.
// F must be IFR and G must start at zero demand.
struct DemandEnvironment {
    DemandDistribution xi;
    DemandDistribution eps;

    DemandEnvironment(DemandDistribution xi_, DemandDistribution eps_)
        : xi(std::move(xi_)), eps(std::move(eps_)) {
        if (eps.lower() != 0.0)
            throw std::invalid_argument("DemandEnvironment: bursty support must start at 0");
        if (!xi.is_ifr())
            throw std::invalid_argument("DemandEnvironment: scheduled demand must be IFR");
    }
};

// E_F[fn(x)]: exact for a point mass, 256-node Gauss-Legendre otherwise.
template <typename Fn>
double expect_over(const DemandDistribution& dist, Fn&& fn) {
    if (dist.kind() == DistKind::point_mass) return fn(dist.lower());
    return num::integrate_gl([&](double x) { return fn(x) * dist.pdf(x); },
                             dist.lower(), dist.grid_upper());
}

// Expected profit of the whole network at reservation k and realized xi:
// r min{k,xi} + s E[min{eps,(k-xi)+}] - c k.
inline double network_profit(double k, double xi, const MarketParams& mp,
                             const DemandDistribution& g) {
    const double headroom = std::max(k - xi, 0.0);
    return mp.r * std::min(k, xi) + mp.s * g.partial_expectation(headroom) - mp.c * k;
}

// Centralized optimum: k = xi + G^{-1}((s-c)/s).
inline double k_centralized(double xi, const MarketParams& mp,
                            const DemandDistribution& g) {
    return xi + g.quantile((mp.s - mp.c) / mp.s);
}

// Scheme I (DB bears risk), information symmetry: WSD and database sides.
inline double wsd_profit_s1(double k, double xi, const MarketParams& mp,
                            const DemandDistribution& g) {
    const double headroom = std::max(k - xi, 0.0);
    return (mp.r - mp.w) * std::min(k, xi) +
           (mp.s - mp.w) * g.partial_expectation(headroom);
}

inline double db_profit_s1_sym(double k, double xi, const MarketParams& mp,
                               const DemandDistribution& g) {
    // E[min{xi + eps, k}] = k when k <= xi, else xi + E[min{eps, k - xi}]
    const double sold = k <= xi ? k : xi + g.partial_expectation(k - xi);
    return mp.w * sold - mp.c * k;
}

inline double k_db_sym(double xi, const MarketParams& mp, const DemandDistribution& g) {
    return xi + g.quantile((mp.w - mp.c) / mp.w);
}

// Scheme I under information asymmetry: the database optimizes against the
// total-demand distribution. Overloads take either (F, G) or the precomputed
// sum distribution.
inline double db_expected_profit_s1_asym(double k, const MarketParams& mp,
                                         const DemandDistribution& total_demand) {
    return mp.w * total_demand.partial_expectation(k) - mp.c * k;
}

inline double db_expected_profit_s1_asym(double k, const MarketParams& mp,
                                         const DemandDistribution& f,
                                         const DemandDistribution& g) {
    return db_expected_profit_s1_asym(k, mp, convolve(f, g));
}

inline double k_db_asym(const MarketParams& mp, const DemandDistribution& total_demand) {
    return total_demand.quantile((mp.w - mp.c) / mp.w);
}

inline double k_db_asym(const MarketParams& mp, const DemandDistribution& f,
                        const DemandDistribution& g) {
    return k_db_asym(mp, convolve(f, g));
}

// Scheme II (WSD bears risk): WSD pays the wholesale price on the full
// reservation; the database side is riskless.
inline double wsd_profit_s2(double k, double xi, const MarketParams& mp,
                            const DemandDistribution& g) {
    const double headroom = std::max(k - xi, 0.0);
    return mp.r * std::min(k, xi) + mp.s * g.partial_expectation(headroom) - mp.w * k;
}

inline double db_profit_s2(double k, const MarketParams& mp) {
    return (mp.w - mp.c) * k;
}

// WSD optimum, identical under both information regimes: xi + G^{-1}((s-w)/s).
inline double k_wsd(double xi, const MarketParams& mp, const DemandDistribution& g) {
    return xi + g.quantile((mp.s - mp.w) / mp.s);
}

// Wholesale price at which the scheme orderings flip: sqrt(s c).
inline double critical_wholesale_price(const MarketParams& mp) {
    return std::sqrt(mp.s * mp.c);
}

// E_xi[network_profit(policy(xi), xi)] by quadrature over F.
inline double expected_network_profit_of_policy(
    const std::function<double(double)>& policy, const MarketParams& mp,
    const DemandDistribution& f, const DemandDistribution& g) {
    return expect_over(f, [&](double xi) { return network_profit(policy(xi), xi, mp, g); });
}

}  // namespace specres
