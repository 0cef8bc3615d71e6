#include <catch2/catch_amalgamated.hpp>

#include "specres/contract.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace specres;

namespace {

MarketParams default_params() { return MarketParams(1.0, 0.8, 0.5, 0.2); }
DemandDistribution default_f() {
    return DemandDistribution::truncated_normal_4sigma(30.0, 64.0);
}
DemandDistribution default_g() { return DemandDistribution::chi_square(30.0); }

// Count sign changes of the screening first-order condition on the scan grid,
// recomputed from primitives independently of solve_k_star.
int foc_sign_changes(RiskScheme scheme, double xi, const MarketParams& mp,
                     const DemandDistribution& f, const DemandDistribution& g,
                     std::size_t points = 512) {
    const double weight = (1.0 - f.cdf(xi)) / f.pdf(xi);
    const double alpha = scheme == RiskScheme::db_bearing ? mp.s - mp.w : mp.s;
    const double cap = g.grid_upper();
    int changes = 0;
    double prev = 0.0;
    for (std::size_t i = 0; i <= points; ++i) {
        const double z = cap * static_cast<double>(i) / static_cast<double>(points);
        const double v = mp.s * (1.0 - g.cdf(z)) - mp.c - weight * alpha * g.pdf(z);
        if (i > 0 && (v > 0.0) != (prev > 0.0)) ++changes;
        prev = v;
    }
    return changes;
}

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

// Closed-form E[min{X,a}] for chi-square(n): n G_{n+2}(a) + a (1 - G_n(a)).
// Built on gamma_p only; machine-precision smooth, free of quadrature noise.
double chi2_partial_expectation(double dof, double a) {
    if (a <= 0.0) return 0.0;
    const double cdf_n = specres::num::gamma_p(0.5 * dof, 0.5 * a);
    const double cdf_n2 = specres::num::gamma_p(0.5 * dof + 1.0, 0.5 * a);
    return dof * cdf_n2 + a * (1.0 - cdf_n);
}

// Virtual surplus recomposed from primitives (chi-square G of given dof).
double oracle_phi(RiskScheme scheme, double k, double xi, const MarketParams& mp,
                  const DemandDistribution& f, double g_dof) {
    const double head = std::max(k - xi, 0.0);
    const double u_tot = mp.r * std::min(k, xi) +
                         mp.s * chi2_partial_expectation(g_dof, head) - mp.c * k;
    const double weight = (1.0 - f.cdf(xi)) / f.pdf(xi);
    const double alpha = scheme == RiskScheme::db_bearing ? mp.s - mp.w : mp.s;
    const double g_cdf = head > 0.0 ? specres::num::gamma_p(0.5 * g_dof, 0.5 * head) : 0.0;
    return u_tot - weight * (mp.r - mp.s + alpha * g_cdf);
}

}  // namespace

TEST_CASE("menu profit per scheme") {
    const auto mp = default_params();
    const auto g = default_g();

    CHECK(wsd_profit_menu(RiskScheme::db_bearing, 30.0, 0.0, 30.0, mp, g) ==
          Catch::Approx((mp.r - mp.w) * 30.0).margin(1e-12));

    // scheme I minus scheme II at the same item is the wholesale charge on
    // unused spectrum: w (k - min{k,xi} - E[min{eps,(k-xi)+}]) >= 0
    for (double k : {25.0, 40.0, 70.0}) {
        const double xi = 30.0, p = 2.0;
        const double u1 = wsd_profit_menu(RiskScheme::db_bearing, k, p, xi, mp, g);
        const double u2 = wsd_profit_menu(RiskScheme::wsd_bearing, k, p, xi, mp, g);
        const double head = std::max(k - xi, 0.0);
        const double unused = k - std::min(k, xi) - g.partial_expectation(head);
        CHECK(u1 - u2 == Catch::Approx(mp.w * unused).margin(1e-9));
        CHECK(u1 - u2 >= -1e-12);
    }

    // Monte Carlo oracle at the default point
    {
        const double k = 40.0, xi = 30.0, p = 2.0;
        const auto draws = g.sample(99, 100000);
        double acc = 0.0, acc2 = 0.0;
        for (double eps : draws) {
            const double sold = std::min(eps, k - xi);
            const double v = (mp.r - mp.w) * xi + (mp.s - mp.w) * sold - p;
            acc += v;
            acc2 += v * v;
        }
        const double mc = acc / static_cast<double>(draws.size());
        const double var = acc2 / static_cast<double>(draws.size()) - mc * mc;
        const double se = std::sqrt(var / static_cast<double>(draws.size()));
        CHECK(std::abs(wsd_profit_menu(RiskScheme::db_bearing, k, p, xi, mp, g) - mc) <
              3.0 * se);
    }
}

TEST_CASE("virtual surplus endpoints and term-by-term recomputation") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();
    const double xi_hi = f.upper();

    // top type: the hazard weight vanishes, phi equals the network profit
    for (double k : {xi_hi, xi_hi + 20.0})
        CHECK(phi(RiskScheme::db_bearing, k, xi_hi, mp, f, g) ==
              Catch::Approx(network_profit(k, xi_hi, mp, g)).margin(1e-9));

    // near-degenerate F: hazard weight ~ 0 close to the mass
    const auto f_tiny = DemandDistribution::truncated_normal_4sigma(30.0, 1e-12);
    const double xi_probe = 30.0 + 2e-7;
    CHECK(phi(RiskScheme::db_bearing, 60.0, xi_probe, mp, f_tiny, g) ==
          Catch::Approx(network_profit(60.0, xi_probe, mp, g)).margin(1e-2));

    // independent recomposition of the defining expression
    const double xi = 30.0, k = 40.0;
    for (RiskScheme scheme : {RiskScheme::db_bearing, RiskScheme::wsd_bearing}) {
        const double alpha = scheme == RiskScheme::db_bearing ? mp.s - mp.w : mp.s;
        const double u_tot = mp.r * std::min(k, xi) +
                             mp.s * g.partial_expectation(k - xi) - mp.c * k;
        const double weight = (1.0 - f.cdf(xi)) / f.pdf(xi);
        const double expected =
            u_tot - weight * (mp.r - mp.s + alpha * g.cdf(k - xi));
        CHECK(phi(scheme, k, xi, mp, f, g) == Catch::Approx(expected).margin(1e-10));
    }
}

TEST_CASE("reservation root-find matches the surplus argmax") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();

    // top type: both schemes collapse onto the centralized reservation
    const double xi_hi = f.upper();
    for (RiskScheme scheme : {RiskScheme::db_bearing, RiskScheme::wsd_bearing})
        CHECK(solve_k_star(scheme, xi_hi, mp, f, g) ==
              Catch::Approx(k_centralized(xi_hi, mp, g)).margin(1e-6));

    // interior ordering k_II <= k_I <= k_centralized
    for (double xi : {5.0, 20.0, 30.0, 45.0, 58.0}) {
        const double k1 = solve_k_star(RiskScheme::db_bearing, xi, mp, f, g);
        const double k2 = solve_k_star(RiskScheme::wsd_bearing, xi, mp, f, g);
        CHECK(k2 <= k1 + 1e-9);
        CHECK(k1 <= k_centralized(xi, mp, g) + 1e-9);
    }

    // brute-force argmax oracle on the unimodal surplus
    for (RiskScheme scheme : {RiskScheme::db_bearing, RiskScheme::wsd_bearing}) {
        const double xi = 30.0;
        const double z_star = grid_argmax(
            [&](double z) { return oracle_phi(scheme, xi + z, xi, mp, f, 30.0); }, 0.0,
            g.grid_upper(), 0.25, 1e-3);
        CHECK(std::abs(solve_k_star(scheme, xi, mp, f, g) - (xi + z_star)) < 1.5e-3);
    }
}

TEST_CASE("first-order condition is unimodal in the headroom") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g_chi = default_g();
    const auto g_tn = DemandDistribution::truncated_normal_4sigma(20.0, 36.0);
    REQUIRE(g_tn.lower() == 0.0);
    for (const auto& g : {g_chi, g_tn})
        for (double xi : {10.0, 30.0, 50.0})
            for (RiskScheme scheme : {RiskScheme::db_bearing, RiskScheme::wsd_bearing})
                CHECK(foc_sign_changes(scheme, xi, mp, f, g) == 1);
}

TEST_CASE("information rent of a tabulated menu") {
    const auto mp = default_params();
    const auto g = default_g();
    const double u_min = 0.75;

    // identity menu k(x) = x has zero integrand (G(0) = 0)
    std::vector<double> grid, ks;
    for (int i = 0; i <= 40; ++i) {
        grid.push_back(static_cast<double>(i));
        ks.push_back(static_cast<double>(i));
    }
    CHECK(wsd_rent(RiskScheme::db_bearing, 0.0, grid, ks, u_min, mp, g) ==
          Catch::Approx(u_min).margin(1e-12));
    for (double xi : {7.5, 20.0, 40.0})
        CHECK(wsd_rent(RiskScheme::db_bearing, xi, grid, ks, u_min, mp, g) ==
              Catch::Approx(u_min + (mp.r - mp.s) * xi).margin(1e-10));

    // refinement oracle: re-integrate the same menu curve with every segment
    // halved; composite Simpson at double resolution must agree closely
    const auto f = default_f();
    const auto menu = build_contract(RiskScheme::db_bearing, mp, f, g, 100);
    const double alpha = rent_coefficient(menu.scheme, mp);
    for (double xi : {10.0, 30.0, 50.0}) {
        double refined = menu.u_min + (mp.r - mp.s) * (xi - menu.xi_lo());
        const std::size_t halves = 4096;
        const double h = (xi - menu.xi_lo()) / static_cast<double>(halves);
        for (std::size_t j = 0; j < halves; ++j) {
            const double a = menu.xi_lo() + h * static_cast<double>(j);
            const double b = a + h;
            const double m = 0.5 * (a + b);
            const double qa = g.cdf(menu.k_at(a) - a);
            const double qm = g.cdf(menu.k_at(m) - m);
            const double qb = g.cdf(menu.k_at(b) - b);
            refined += alpha * h / 6.0 * (qa + 4.0 * qm + qb);
        }
        CHECK(wsd_rent(menu.scheme, xi, menu, mp, g) ==
              Catch::Approx(refined).margin(1e-6));
    }

    // rent grows with the type
    double prev = -1.0;
    for (double xi : {0.0, 10.0, 20.0, 40.0, 60.0}) {
        const double rent = wsd_rent(menu.scheme, xi, menu, mp, g);
        CHECK(rent >= prev);
        prev = rent;
    }
}

TEST_CASE("payment inverts the menu profit") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();

    // at the bottom type with u_min = 0 the fee equals the gross profit
    const double k0 = 34.0;
    const double p0 = payment(RiskScheme::db_bearing, f.lower(), k0, 0.0, mp, g);
    const double head = std::max(k0 - f.lower(), 0.0);
    CHECK(p0 == Catch::Approx((mp.r - mp.w) * std::min(k0, f.lower()) +
                              (mp.s - mp.w) * g.partial_expectation(head))
                    .margin(1e-12));

    std::mt19937_64 gen(17);
    for (RiskScheme scheme : {RiskScheme::db_bearing, RiskScheme::wsd_bearing})
        for (int i = 0; i < 20; ++i) {
            const double xi = 60.0 * num::u01(gen);
            const double k = xi + 50.0 * num::u01(gen);
            const double rent = 3.0 * num::u01(gen);
            const double p = payment(scheme, xi, k, rent, mp, g);
            CHECK(wsd_profit_menu(scheme, k, p, xi, mp, g) ==
                  Catch::Approx(rent).margin(1e-9));
        }
}

TEST_CASE("optimal menus are monotone and ordered across schemes") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();
    const auto menu1 = build_contract(RiskScheme::db_bearing, mp, f, g, 200);
    const auto menu2 = build_contract(RiskScheme::wsd_bearing, mp, f, g, 200);

    REQUIRE(menu1.size() == 200);
    for (std::size_t i = 1; i < menu1.size(); ++i) {
        CHECK(menu1.k_values[i] >= menu1.k_values[i - 1]);
        CHECK(menu1.p_values[i] >= menu1.p_values[i - 1] - 1e-9);  // scheme I co-monotone
        CHECK(menu2.k_values[i] >= menu2.k_values[i - 1]);
    }

    // scheme ordering holds node by node, with equality at the top
    for (std::size_t i = 0; i < menu1.size(); ++i) {
        CHECK(menu2.k_values[i] <= menu1.k_values[i] + 1e-9);
        CHECK(menu1.k_values[i] <=
              k_centralized(menu1.xi_grid[i], mp, g) + 1e-9);
    }
    const double k_top = k_centralized(menu1.xi_grid.back(), mp, g);
    CHECK(std::abs(menu1.k_values.back() - k_top) < 1e-6);
    CHECK(std::abs(menu2.k_values.back() - k_top) < 1e-6);

    // broker prefers bearing the risk itself
    const double db1 = db_expected_profit_under_menu(menu1, mp, f, g);
    const double db2 = db_expected_profit_under_menu(menu2, mp, f, g);
    CHECK(db1 >= db2);

    CHECK_THROWS_AS(build_contract(RiskScheme::db_bearing, mp, f, g, 1),
                    std::invalid_argument);
}

TEST_CASE("two-item menu over a near-degenerate type space") {
    const auto mp = default_params();
    const auto g = default_g();
    const auto f_tiny = DemandDistribution::truncated_normal_4sigma(30.0, 1e-12);
    const auto menu = build_contract(RiskScheme::db_bearing, mp, f_tiny, g, 2);
    REQUIRE(menu.size() == 2);
    const double k_top = k_centralized(f_tiny.upper(), mp, g);
    CHECK(menu.k_values[0] == Catch::Approx(k_top).margin(1e-2));
    CHECK(menu.k_values[1] == Catch::Approx(k_top).margin(1e-6));
    const double p_top = payment(RiskScheme::db_bearing, menu.xi_grid[1],
                                 menu.k_values[1],
                                 wsd_rent(menu.scheme, menu.xi_grid[1], menu, mp, g),
                                 mp, g);
    CHECK(menu.p_values[1] == Catch::Approx(p_top).margin(1e-9));
}

TEST_CASE("feasibility verifier accepts built menus and catches tampering") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();
    const double tol = 1e-6 * mp.r * f.grid_upper();

    for (RiskScheme scheme : {RiskScheme::db_bearing, RiskScheme::wsd_bearing}) {
        const auto menu = build_contract(scheme, mp, f, g, 60);
        const auto report = verify_feasibility(menu, mp, g, tol);
        CHECK(report.feasible);
        CHECK(report.ic_max_violation <= tol);
        CHECK(report.ir_min_slack >= -1e-9);
        CHECK(report.monotonicity_ok);

        // discounting the top item makes lower types envy it
        auto tampered = menu;
        tampered.p_values.back() *= 0.9;
        const auto bad = verify_feasibility(tampered, mp, g, tol);
        CHECK(bad.ic_max_violation > tol);
        CHECK_FALSE(bad.feasible);
    }
}

TEST_CASE("single-item menu is IC-vacuous and IR-safe upward") {
    const auto mp = default_params();
    const auto g = default_g();
    const double xi_lo = 10.0, k = 40.0, u_min = 0.5;
    ContractMenu menu;
    menu.scheme = RiskScheme::db_bearing;
    menu.u_min = u_min;
    menu.xi_grid = {xi_lo};
    menu.k_values = {k};
    menu.p_values = {payment(menu.scheme, xi_lo, k, u_min, mp, g)};

    const auto report = verify_feasibility(menu, mp, g, 1e-9);
    CHECK(report.feasible);
    CHECK(report.ic_max_violation == 0.0);
    CHECK(report.ir_min_slack == Catch::Approx(0.0).margin(1e-9));

    // profit on the single item grows with the true type
    double prev = -1e9;
    for (double xi : {xi_lo, 15.0, 25.0, 35.0}) {
        const double u =
            wsd_profit_menu(menu.scheme, k, menu.p_values[0], xi, mp, g);
        CHECK(u >= prev - 1e-12);
        CHECK(u >= u_min - 1e-9);
        prev = u;
    }
}

TEST_CASE("feasibility is invariant under fee/outside-option transfers") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();
    const auto menu = build_contract(RiskScheme::db_bearing, mp, f, g, 40);
    const auto base = verify_feasibility(menu, mp, g, 1e-8);

    auto shifted = menu;
    const double delta = 1.25;
    for (double& p : shifted.p_values) p += delta;
    shifted.u_min -= delta;
    const auto moved = verify_feasibility(shifted, mp, g, 1e-8);
    CHECK(moved.feasible == base.feasible);
    CHECK(moved.ic_max_violation == Catch::Approx(base.ic_max_violation).margin(1e-9));
    CHECK(moved.ir_min_slack == Catch::Approx(base.ir_min_slack).margin(1e-9));
}

TEST_CASE("broker profit: reformulation identity and transfer sensitivity") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();

    for (RiskScheme scheme : {RiskScheme::db_bearing, RiskScheme::wsd_bearing}) {
        const auto menu = build_contract(scheme, mp, f, g, 200);
        const double direct = db_expected_profit_under_menu(menu, mp, f, g);
        const double reformulated = db_expected_profit_via_surplus(menu, mp, f, g);
        CHECK(direct == Catch::Approx(reformulated).epsilon(1e-6));
    }

    // frozen regression value for the buyer-bearing-risk menu at defaults
    // (stable to ~4e-10 under grid doubling)
    const auto menu2 = build_contract(RiskScheme::wsd_bearing, mp, f, g, 200);
    CHECK(db_expected_profit_under_menu(menu2, mp, f, g) ==
          Catch::Approx(29.6864996255).margin(1e-6));

    // raising u_min by delta lowers the broker profit by exactly delta
    const double delta = 0.6;
    const MarketParams mp_shift(mp.r, mp.s, mp.w, mp.c, delta);
    const auto menu0 = build_contract(RiskScheme::db_bearing, mp, f, g, 100);
    const auto menu_shift = build_contract(RiskScheme::db_bearing, mp_shift, f, g, 100);
    const double d0 = db_expected_profit_under_menu(menu0, mp, f, g);
    const double d1 = db_expected_profit_under_menu(menu_shift, mp_shift, f, g);
    CHECK(d0 - d1 == Catch::Approx(delta).margin(1e-9));
}

TEST_CASE("menu optimality against feasible perturbations") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();
    const auto menu = build_contract(RiskScheme::db_bearing, mp, f, g, 60);
    const double best = db_expected_profit_under_menu(menu, mp, f, g);

    for (double bump : {-0.8, -0.2, 0.2, 0.8}) {
        auto perturbed = menu;
        for (std::size_t i = 0; i < perturbed.size(); ++i)
            perturbed.k_values[i] += bump;  // keeps k nondecreasing
        const auto rents = detail::rent_profile(perturbed.scheme, perturbed.xi_grid,
                                                perturbed.k_values, perturbed.u_min,
                                                mp, g);
        for (std::size_t i = 0; i < perturbed.size(); ++i)
            perturbed.p_values[i] = payment(perturbed.scheme, perturbed.xi_grid[i],
                                            perturbed.k_values[i], rents[i], mp, g);
        REQUIRE(verify_feasibility(perturbed, mp, g, 1e-6).feasible);
        CHECK(db_expected_profit_under_menu(perturbed, mp, f, g) <= best + 1e-9);
    }
}

TEST_CASE("envelope identity along the built menus") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();
    for (RiskScheme scheme : {RiskScheme::db_bearing, RiskScheme::wsd_bearing}) {
        const auto menu = build_contract(scheme, mp, f, g, 200);
        const auto rents = detail::rent_profile(scheme, menu.xi_grid, menu.k_values,
                                                menu.u_min, mp, g);
        const double alpha = rent_coefficient(scheme, mp);
        double worst = 0.0;
        for (std::size_t i = 1; i + 1 < menu.size(); ++i) {
            const double h = menu.xi_grid[i + 1] - menu.xi_grid[i - 1];
            const double fd = (rents[i + 1] - rents[i - 1]) / h;
            const double analytic =
                (mp.r - mp.s) +
                alpha * g.cdf(menu.k_values[i] - menu.xi_grid[i]);
            worst = std::max(worst, std::abs(fd - analytic) / std::abs(analytic));
        }
        CHECK(worst < 1e-3);
    }
}

TEST_CASE("marginal price curves per scheme") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();

    const auto menu1 =
        build_contract(RiskScheme::db_bearing, mp, f, g, 200).collapse_duplicate_k();
    const auto curve1 = marginal_price_curve(menu1);
    for (std::size_t i = 0; i < curve1.size(); ++i) {
        CHECK(curve1[i].second >= -1e-6);
        if (i > 0) CHECK(curve1[i].second <= curve1[i - 1].second + 1e-4);
    }
    // analytic slope (s - w)[1 - G(k - xi)] at interior midpoints
    for (std::size_t i = 1; i + 1 < menu1.size(); i += 20) {
        const double xi_mid = 0.5 * (menu1.xi_grid[i] + menu1.xi_grid[i + 1]);
        const double k_mid = 0.5 * (menu1.k_values[i] + menu1.k_values[i + 1]);
        const double analytic = (mp.s - mp.w) * (1.0 - g.cdf(k_mid - xi_mid));
        const double slope = (menu1.p_values[i + 1] - menu1.p_values[i]) /
                             (menu1.k_values[i + 1] - menu1.k_values[i]);
        CHECK(slope == Catch::Approx(analytic).margin(2e-3));
    }

    const auto menu2 =
        build_contract(RiskScheme::wsd_bearing, mp, f, g, 200).collapse_duplicate_k();
    const auto curve2 = marginal_price_curve(menu2);
    int recrossings = 0;
    bool seen_negative = false;
    for (std::size_t i = 1; i < menu2.size(); ++i) {
        const double xi_mid = 0.5 * (menu2.xi_grid[i - 1] + menu2.xi_grid[i]);
        const double k_mid = curve2[i - 1].first;
        const double analytic = mp.s * (1.0 - g.cdf(k_mid - xi_mid)) - mp.w;
        CHECK(curve2[i - 1].second == Catch::Approx(analytic).margin(2e-3));
        if (seen_negative && curve2[i - 1].second > 1e-6) ++recrossings;
        if (curve2[i - 1].second < -1e-9) seen_negative = true;
    }
    CHECK(recrossings == 0);  // crosses zero at most once, from above
    CHECK(seen_negative);
    CHECK(curve2.front().second > 0.0);

    // fee rises then falls along the scheme II menu
    const auto max_it = std::max_element(menu2.p_values.begin(), menu2.p_values.end());
    CHECK(max_it != menu2.p_values.begin());
    CHECK(max_it != menu2.p_values.end() - 1);

    // duplicate reservations must be rejected
    auto dup = menu1;
    dup.k_values[1] = dup.k_values[0];
    CHECK_THROWS_AS(marginal_price_curve(dup), std::invalid_argument);
}

TEST_CASE("broker profit falls as scheduled demand disperses") {
    const auto mp = default_params();
    const auto g = default_g();
    const auto f_lo = DemandDistribution::truncated_normal_4sigma(30.0, 16.0);
    const auto f_hi = DemandDistribution::truncated_normal_4sigma(30.0, 64.0);
    for (RiskScheme scheme : {RiskScheme::db_bearing, RiskScheme::wsd_bearing}) {
        const auto menu_lo = build_contract(scheme, mp, f_lo, g, 100);
        const auto menu_hi = build_contract(scheme, mp, f_hi, g, 100);
        CHECK(db_expected_profit_under_menu(menu_lo, mp, f_lo, g) >
              db_expected_profit_under_menu(menu_hi, mp, f_hi, g));
    }
}

TEST_CASE("menus round-trip through csv with sidecar metadata") {
    const auto mp = default_params();
    const auto f = default_f();
    const auto g = default_g();
    const auto menu = build_contract(RiskScheme::wsd_bearing, mp, f, g, 50);

    const auto path = std::filesystem::temp_directory_path() / "specres_menu_test.csv";
    save_menu_csv(menu, mp, f, g, path.string());
    const auto loaded = load_menu_csv(path.string());
    CHECK(loaded.scheme == menu.scheme);
    CHECK(loaded.u_min == menu.u_min);
    REQUIRE(loaded.size() == menu.size());
    for (std::size_t i = 0; i < menu.size(); ++i) {
        CHECK(loaded.xi_grid[i] == Catch::Approx(menu.xi_grid[i]).margin(1e-9));
        CHECK(loaded.k_values[i] == Catch::Approx(menu.k_values[i]).margin(1e-9));
        CHECK(loaded.p_values[i] == Catch::Approx(menu.p_values[i]).margin(1e-9));
    }
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".meta");
}
