#include <catch2/catch_amalgamated.hpp>

#include "specres/market.hpp"

#include <cmath>
#include <random>

using namespace specres;

namespace {

MarketParams default_params() { return MarketParams(1.0, 0.8, 0.5, 0.2); }

DemandDistribution default_g() { return DemandDistribution::chi_square(30.0); }

DemandDistribution default_f() {
    return DemandDistribution::truncated_normal_4sigma(30.0, 64.0);
}

// Argmax of a unimodal objective: coarse scan, then a fine scan around the
// incumbent. Equivalent to the full fine grid for unimodal f.
double grid_argmax(const std::function<double(double)>& f, double lo, double hi,
                   double coarse_step, double fine_step) {
    double best_x = lo, best_v = f(lo);
    for (double x = lo; x <= hi + 1e-12; x += coarse_step) {
        const double v = f(x);
        if (v > best_v) { best_v = v; best_x = x; }
    }
    const double a = std::max(lo, best_x - 2.0 * coarse_step);
    const double b = std::min(hi, best_x + 2.0 * coarse_step);
    for (double x = a; x <= b + 1e-12; x += fine_step) {
        const double v = f(x);
        if (v > best_v) { best_v = v; best_x = x; }
    }
    return best_x;
}

}  // namespace

TEST_CASE("market params enforce the price ordering") {
    CHECK_NOTHROW(default_params());
    CHECK_THROWS_AS(MarketParams(0.8, 1.0, 0.5, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(MarketParams(1.0, 0.8, 0.9, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(MarketParams(1.0, 0.8, 0.5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(MarketParams(1.0, 0.8, 0.5, 0.2, -1.0), std::invalid_argument);
}

TEST_CASE("demand environment validates its members") {
    CHECK_NOTHROW(DemandEnvironment(default_f(), default_g()));
    // bursty demand must start at zero
    CHECK_THROWS_AS(
        DemandEnvironment(default_f(), DemandDistribution::point_mass(5.0)),
        std::invalid_argument);
}

TEST_CASE("network profit basics") {
    const auto mp = default_params();
    const auto g = default_g();
    CHECK(network_profit(0.0, 30.0, mp, g) == 0.0);
    CHECK(network_profit(30.0, 30.0, mp, g) ==
          Catch::Approx((mp.r - mp.c) * 30.0).margin(1e-12));

    // quadrature value against a Monte Carlo oracle over eps
    const double k = 40.0, xi = 30.0;
    const auto draws = g.sample(2024, 100000);
    double acc = 0.0, acc2 = 0.0;
    for (double eps : draws) {
        const double v = mp.r * std::min(k, xi) + mp.s * std::min(eps, k - xi) - mp.c * k;
        acc += v;
        acc2 += v * v;
    }
    const double mc = acc / static_cast<double>(draws.size());
    const double var = acc2 / static_cast<double>(draws.size()) - mc * mc;
    const double se = std::sqrt(var / static_cast<double>(draws.size()));
    CHECK(std::abs(network_profit(k, xi, mp, g) - mc) < 3.0 * se);
}

TEST_CASE("centralized reservation solves the first-order condition") {
    const auto mp = default_params();
    const auto g = default_g();
    const double xi = 30.0;
    CHECK(k_centralized(xi, mp, g) ==
          Catch::Approx(xi + g.quantile(0.75)).margin(1e-12));

    // brute-force argmax oracle (network profit is concave in k >= xi)
    const double oracle = grid_argmax(
        [&](double k) { return network_profit(k, xi, mp, g); }, xi, xi + 100.0, 0.25,
        1e-3);
    CHECK(std::abs(k_centralized(xi, mp, g) - oracle) < 1.5e-3);

    // c -> s makes the bursty quantile collapse to the support infimum
    // (chi-square(2) has quantile(p) = -2 ln(1-p), so quantile(p) -> 0)
    const MarketParams tight(1.0, 0.8, 0.79999, 0.79998);
    const auto g2 = DemandDistribution::chi_square(2.0);
    CHECK(k_centralized(xi, tight, g2) == Catch::Approx(xi).margin(1e-3));
}

TEST_CASE("scheme I profit split conserves the network profit") {
    const auto mp = default_params();
    const auto g = default_g();

    CHECK(wsd_profit_s1(30.0, 30.0, mp, g) ==
          Catch::Approx((mp.r - mp.w) * 30.0).margin(1e-12));
    CHECK(db_profit_s1_sym(30.0, 30.0, mp, g) ==
          Catch::Approx((mp.w - mp.c) * 30.0).margin(1e-12));

    std::mt19937_64 gen(5);
    for (int i = 0; i < 50; ++i) {
        const double k = 60.0 * num::u01(gen);
        const double xi = 50.0 * num::u01(gen);
        const double total = wsd_profit_s1(k, xi, mp, g) + db_profit_s1_sym(k, xi, mp, g);
        CHECK(total == Catch::Approx(network_profit(k, xi, mp, g)).margin(1e-9));
    }
}

TEST_CASE("scheme II profit split conserves the network profit") {
    const auto mp = default_params();
    const auto g = default_g();
    CHECK(wsd_profit_s2(0.0, 30.0, mp, g) == 0.0);
    CHECK(db_profit_s2(0.0, mp) == 0.0);
    CHECK(db_profit_s2(20.0, mp) == Catch::Approx(2.0 * db_profit_s2(10.0, mp)));

    std::mt19937_64 gen(6);
    for (int i = 0; i < 50; ++i) {
        const double k = 60.0 * num::u01(gen);
        const double xi = 50.0 * num::u01(gen);
        const double total = wsd_profit_s2(k, xi, mp, g) + db_profit_s2(k, mp);
        CHECK(total == Catch::Approx(network_profit(k, xi, mp, g)).margin(1e-9));
    }
}

TEST_CASE("database reservation under information symmetry") {
    const auto mp = default_params();
    const auto g = default_g();
    const double xi = 30.0;
    CHECK(k_db_sym(xi, mp, g) == Catch::Approx(xi + g.quantile(0.6)).margin(1e-12));
    CHECK(k_db_sym(xi, mp, g) < k_centralized(xi, mp, g));

    const double oracle = grid_argmax(
        [&](double k) { return db_profit_s1_sym(k, xi, mp, g); }, xi, xi + 100.0, 0.25,
        1e-3);
    CHECK(std::abs(k_db_sym(xi, mp, g) - oracle) < 1.5e-3);

    // w -> c makes the reservation collapse onto the scheduled demand
    const MarketParams near_c(1.0, 0.8, 0.2000002, 0.2);
    const auto g2 = DemandDistribution::chi_square(2.0);
    CHECK(k_db_sym(xi, near_c, g2) == Catch::Approx(xi).margin(1e-3));
}

TEST_CASE("database reservation under information asymmetry") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();
    const auto total = convolve(f, g);

    // degenerate F reduces to the symmetric solution
    const auto pm = DemandDistribution::point_mass(30.0);
    CHECK(k_db_asym(mp, pm, g) == Catch::Approx(k_db_sym(30.0, mp, g)).margin(5e-2));
    CHECK(db_expected_profit_s1_asym(0.0, mp, total) == 0.0);
    for (double k : {40.0, 55.0})
        CHECK(db_expected_profit_s1_asym(k, mp, pm, g) ==
              Catch::Approx(db_profit_s1_sym(k, 30.0, mp, g)).margin(1e-3));

    // Monte Carlo oracle over (xi, eps) at k = 60
    {
        const double k = 60.0;
        const std::size_t n = 100000;
        const auto xs = f.sample(31, n);
        const auto ys = g.sample(32, n);
        double acc = 0.0, acc2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = mp.w * std::min(xs[i] + ys[i], k) - mp.c * k;
            acc += v;
            acc2 += v * v;
        }
        const double mc = acc / static_cast<double>(n);
        const double var = acc2 / static_cast<double>(n) - mc * mc;
        const double se = std::sqrt(var / static_cast<double>(n));
        CHECK(std::abs(db_expected_profit_s1_asym(k, mp, total) - mc) < 3.0 * se);
    }

    // monotone in w, and the solver matches a brute-force argmax
    double prev = 0.0;
    for (double w : {0.3, 0.4, 0.5, 0.6, 0.7}) {
        const auto mpw = mp.with_wholesale(w);
        const double k = k_db_asym(mpw, total);
        CHECK(k >= prev);
        prev = k;
    }
    const double oracle = grid_argmax(
        [&](double k) { return db_expected_profit_s1_asym(k, mp, total); }, 0.0, 140.0,
        0.5, 1e-3);
    CHECK(std::abs(k_db_asym(mp, total) - oracle) < 2e-3);
}

TEST_CASE("WSD reservation is regime independent and grid verified") {
    const auto mp = default_params();
    const auto g = default_g();
    const double xi = 30.0;
    CHECK(k_wsd(xi, mp, g) == Catch::Approx(xi + g.quantile(0.375)).margin(1e-12));

    const double oracle = grid_argmax(
        [&](double k) { return wsd_profit_s2(k, xi, mp, g); }, xi, xi + 100.0, 0.25,
        1e-3);
    CHECK(std::abs(k_wsd(xi, mp, g) - oracle) < 1.5e-3);

    const MarketParams near_s(1.0, 0.8, 0.79999, 0.2);
    const auto g2 = DemandDistribution::chi_square(2.0);
    CHECK(k_wsd(xi, near_s, g2) == Catch::Approx(xi).margin(1e-3));
}

TEST_CASE("critical wholesale price separates the reservation order") {
    const auto mp = default_params();
    const auto g = default_g();
    CHECK(critical_wholesale_price(mp) == Catch::Approx(0.4).margin(1e-15));

    // s -> c squeezes the critical price onto c
    const MarketParams tight(1.0, 0.202, 0.201, 0.2);
    CHECK(critical_wholesale_price(tight) == Catch::Approx(0.2).margin(2e-3));

    // at w = sqrt(sc) both quantile arguments coincide
    const auto at_crit = mp.with_wholesale(0.4);
    CHECK(std::abs(k_db_sym(30.0, at_crit, g) - k_wsd(30.0, at_crit, g)) < 1e-6);

    for (double w : {0.25, 0.3, 0.35, 0.45, 0.55, 0.65}) {
        const auto mpw = mp.with_wholesale(w);
        for (double xi : {10.0, 30.0, 50.0}) {
            const double diff = k_db_sym(xi, mpw, g) - k_wsd(xi, mpw, g);
            if (w < 0.4) CHECK(diff < 0.0);
            else CHECK(diff > 0.0);
            CHECK(k_centralized(xi, mpw, g) >=
                  std::max(k_db_sym(xi, mpw, g), k_wsd(xi, mpw, g)) - 1e-9);
        }
    }
}

TEST_CASE("expected network profit of a policy") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();

    CHECK(expected_network_profit_of_policy([](double) { return 0.0; }, mp, f, g) ==
          Catch::Approx(0.0).margin(1e-12));

    // centralized policy value is independent of w
    const double base = expected_network_profit_of_policy(
        [&](double xi) { return k_centralized(xi, mp, g); }, mp, f, g);
    for (double w : {0.3, 0.6}) {
        const auto mpw = mp.with_wholesale(w);
        const double v = expected_network_profit_of_policy(
            [&](double xi) { return k_centralized(xi, mpw, g); }, mpw, f, g);
        CHECK(v == Catch::Approx(base).margin(1e-9));
    }

    // constant policy vs a Monte Carlo oracle over (xi, eps)
    const auto total = convolve(f, g);
    const double k_const = k_db_asym(mp, total);
    const double analytic = expected_network_profit_of_policy(
        [&](double) { return k_const; }, mp, f, g);
    const std::size_t n = 100000;
    const auto xs = f.sample(41, n);
    const auto ys = g.sample(42, n);
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double head = std::max(k_const - xs[i], 0.0);
        const double v = mp.r * std::min(k_const, xs[i]) +
                         mp.s * std::min(ys[i], head) - mp.c * k_const;
        acc += v;
        acc2 += v * v;
    }
    const double mc = acc / static_cast<double>(n);
    const double var = acc2 / static_cast<double>(n) - mc * mc;
    CHECK(std::abs(analytic - mc) < 3.0 * std::sqrt(var / static_cast<double>(n)));
}

TEST_CASE("ordering lemma holds at the expected profit level") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();
    for (double w : {0.3, 0.35, 0.45, 0.6}) {
        const auto mpw = mp.with_wholesale(w);
        const double net_db = expected_network_profit_of_policy(
            [&](double xi) { return k_db_sym(xi, mpw, g); }, mpw, f, g);
        const double net_wsd = expected_network_profit_of_policy(
            [&](double xi) { return k_wsd(xi, mpw, g); }, mpw, f, g);
        if (w < critical_wholesale_price(mpw)) CHECK(net_wsd > net_db * (1.0 + 1e-6));
        else CHECK(net_db > net_wsd * (1.0 + 1e-6));
    }
}
