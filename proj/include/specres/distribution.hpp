#pragma once

// Univariate demand distributions: truncated normal, chi-square, point mass,
// and tabulated (empirical-grid) cdfs, with the quantile / partial-expectation
// / hazard primitives the reservation solvers are built on.
//
// All objects are immutable after construction; every operation is safe to
// call concurrently. Sampling takes an explicit seed and keeps its generator
// state local.

#include "specres/math.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace specres {

enum class DistKind { truncated_normal, chi_square, point_mass, empirical_grid };

inline const char* to_string(DistKind kind) {
    switch (kind) {
        case DistKind::truncated_normal: return "truncated-normal";
        case DistKind::chi_square: return "chi-square";
        case DistKind::point_mass: return "point-mass";
        case DistKind::empirical_grid: return "empirical-grid";
    }
    return "?";
}

namespace detail {

// 1 - cdf values below this are treated as zero when dividing (hazard).
inline constexpr double survival_floor = 1e-12;

struct TruncatedNormalImpl {
    double mu, sigma;   // parent parameters
    double lo, hi;
    double z_lo, z_hi;  // parent cdf at the truncation bounds
    double mass;        // z_hi - z_lo

    TruncatedNormalImpl(double mu_, double sigma2, double lo_, double hi_)
        : mu(mu_), sigma(std::sqrt(sigma2)), lo(lo_), hi(hi_) {
        if (!(sigma2 > 0.0))
            throw std::invalid_argument("truncated normal: variance must be positive");
        if (!(hi > lo))
            throw std::invalid_argument("truncated normal: requires hi > lo");
        z_lo = num::norm_cdf((lo - mu) / sigma);
        z_hi = num::norm_cdf((hi - mu) / sigma);
        mass = z_hi - z_lo;
        if (!(mass > 0.0))
            throw std::invalid_argument("truncated normal: no mass on [lo, hi]");
    }

    double pdf(double x) const {
        if (x < lo || x > hi) return 0.0;
        return num::norm_pdf((x - mu) / sigma) / (sigma * mass);
    }
    double cdf(double x) const {
        if (x <= lo) return 0.0;
        if (x >= hi) return 1.0;
        return (num::norm_cdf((x - mu) / sigma) - z_lo) / mass;
    }
    double quantile(double p) const {
        if (p <= 0.0) return lo;
        if (p >= 1.0) return hi;
        const double x = mu + sigma * num::norm_quantile(z_lo + p * mass);
        return std::clamp(x, lo, hi);
    }
    double mean() const {
        const double a = (lo - mu) / sigma;
        const double b = (hi - mu) / sigma;
        return mu + sigma * (num::norm_pdf(a) - num::norm_pdf(b)) / mass;
    }
    double variance() const {
        const double a = (lo - mu) / sigma;
        const double b = (hi - mu) / sigma;
        const double pa = num::norm_pdf(a), pb = num::norm_pdf(b);
        const double d = (pa - pb) / mass;
        return sigma * sigma * (1.0 + (a * pa - b * pb) / mass - d * d);
    }
};

struct ChiSquareImpl {
    double dof;
    double cap;  // quantile(1 - 1e-10), the finite bound used for grids

    explicit ChiSquareImpl(double dof_) : dof(dof_) {
        if (!(dof > 0.0))
            throw std::invalid_argument("chi-square: dof must be positive");
        cap = quantile_newton(1.0 - 1e-10);
    }

    double pdf(double x) const {
        if (x < 0.0) return 0.0;
        const double h = 0.5 * dof;
        if (x == 0.0) {
            if (dof > 2.0) return 0.0;
            if (dof == 2.0) return 0.5;
            return std::numeric_limits<double>::infinity();
        }
        return std::exp((h - 1.0) * std::log(x) - 0.5 * x - std::lgamma(h) -
                        h * std::log(2.0));
    }
    double cdf(double x) const {
        if (x <= 0.0) return 0.0;
        return num::gamma_p(0.5 * dof, 0.5 * x);
    }
    double quantile_newton(double p) const {
        if (p <= 0.0) return 0.0;
        // Wilson-Hilferty start, then safeguarded Newton on the cdf.
        const double z = num::norm_quantile(std::min(p, 1.0 - 1e-16));
        const double t = 2.0 / (9.0 * dof);
        double x = dof * std::pow(std::max(1e-12, 1.0 - t + z * std::sqrt(t)), 3.0);
        double lo = 0.0, hi = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 200; ++it) {
            const double err = cdf(x) - p;
            if (err > 0.0) hi = x; else lo = x;
            const double g = pdf(x);
            double next = (g > 0.0) ? x - err / g : x;
            if (!(next > lo) || !(next < hi))
                next = std::isinf(hi) ? 2.0 * (lo + 1.0) : 0.5 * (lo + hi);
            if (std::abs(next - x) <= 1e-13 * (1.0 + std::abs(x))) return next;
            x = next;
        }
        return x;
    }
};

struct PointMassImpl {
    double x0;
    explicit PointMassImpl(double x0_) : x0(x0_) {
        if (!std::isfinite(x0_))
            throw std::invalid_argument("point mass: location must be finite");
    }
};

struct EmpiricalGridImpl {
    double lo, hi, step;
    std::vector<double> cdf_values;  // c[0] == 0, c.back() == 1
    std::vector<double> pdf_values;  // central differences of the cdf

    EmpiricalGridImpl(double lo_, double hi_, std::vector<double> cdf_in)
        : lo(lo_), hi(hi_), cdf_values(std::move(cdf_in)) {
        const std::size_t m = cdf_values.size();
        if (m < 2) throw std::invalid_argument("empirical grid: needs >= 2 nodes");
        if (!(hi > lo)) throw std::invalid_argument("empirical grid: requires hi > lo");
        step = (hi - lo) / static_cast<double>(m - 1);

        for (std::size_t i = 1; i < m; ++i) {
            if (cdf_values[i] < cdf_values[i - 1] - 1e-9)
                throw std::invalid_argument("empirical grid: cdf not monotone");
            cdf_values[i] = std::max(cdf_values[i], cdf_values[i - 1]);
        }
        const double c0 = cdf_values.front();
        const double c1 = cdf_values.back();
        if (std::abs(c0) > 1e-4 || std::abs(c1 - 1.0) > 1e-4)
            throw std::invalid_argument("empirical grid: cdf must run from ~0 to ~1");
        const double scale = c1 - c0;
        if (!(scale > 0.0))
            throw std::invalid_argument("empirical grid: degenerate cdf");
        for (double& c : cdf_values) c = (c - c0) / scale;
        cdf_values.front() = 0.0;
        cdf_values.back() = 1.0;

        pdf_values.resize(m);
        pdf_values.front() = (cdf_values[1] - cdf_values[0]) / step;
        pdf_values.back() = (cdf_values[m - 1] - cdf_values[m - 2]) / step;
        for (std::size_t i = 1; i + 1 < m; ++i)
            pdf_values[i] = (cdf_values[i + 1] - cdf_values[i - 1]) / (2.0 * step);
    }

    double node(std::size_t i) const { return lo + step * static_cast<double>(i); }

    double cdf(double x) const {
        if (x <= lo) return 0.0;
        if (x >= hi) return 1.0;
        const double u = (x - lo) / step;
        const auto i = static_cast<std::size_t>(u);
        const double frac = u - static_cast<double>(i);
        return cdf_values[i] + frac * (cdf_values[i + 1] - cdf_values[i]);
    }
    double pdf(double x) const {
        if (x < lo || x > hi) return 0.0;
        const double u = std::min((x - lo) / step,
                                  static_cast<double>(cdf_values.size() - 1));
        const auto i = std::min(static_cast<std::size_t>(u), cdf_values.size() - 2);
        const double frac = u - static_cast<double>(i);
        return pdf_values[i] + frac * (pdf_values[i + 1] - pdf_values[i]);
    }
    double quantile(double p) const {
        if (p <= 0.0) return lo;
        if (p >= 1.0) return hi;
        const auto it = std::lower_bound(cdf_values.begin(), cdf_values.end(), p);
        const auto i = static_cast<std::size_t>(it - cdf_values.begin());
        if (i == 0) return lo;
        const double c0 = cdf_values[i - 1], c1 = cdf_values[i];
        if (c1 <= c0) return node(i - 1);
        return node(i - 1) + step * (p - c0) / (c1 - c0);
    }
    // Exact integral of (1 - cdf) over [a, b] under the piecewise-linear cdf.
    double survival_integral(double a, double b) const {
        a = std::max(a, lo);
        b = std::min(b, hi);
        if (!(b > a)) return 0.0;
        double total = 0.0;
        double x = a;
        auto seg = static_cast<std::size_t>((a - lo) / step);
        seg = std::min(seg, cdf_values.size() - 2);
        while (x < b) {
            const double seg_end = std::min(node(seg + 1), b);
            const double sa = 1.0 - cdf(x);
            const double sb = 1.0 - cdf(seg_end);
            total += 0.5 * (sa + sb) * (seg_end - x);
            x = seg_end;
            ++seg;
        }
        return total;
    }
    double mean() const { return lo + survival_integral(lo, hi); }
    double variance() const {
        // E[(X - lo)^2] = int 2 (u - lo) (1 - F(u)) du, exact per segment
        // (the integrand is quadratic, Simpson is exact).
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < cdf_values.size(); ++i) {
            const double a = node(i), b = node(i + 1);
            const double m = 0.5 * (a + b);
            const double fa = 2.0 * (a - lo) * (1.0 - cdf_values[i]);
            const double fb = 2.0 * (b - lo) * (1.0 - cdf_values[i + 1]);
            const double fm = 2.0 * (m - lo) * (1.0 - cdf(m));
            acc += (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        }
        const double mu = mean() - lo;
        return acc - mu * mu;
    }
};

}  // namespace detail

class DemandDistribution {
    using Variant = std::variant<detail::TruncatedNormalImpl, detail::ChiSquareImpl,
                                 detail::PointMassImpl, detail::EmpiricalGridImpl>;
    Variant impl_;

    explicit DemandDistribution(Variant impl) : impl_(std::move(impl)) {}

    template <typename V>
    decltype(auto) visit(V&& v) const {
        return std::visit(std::forward<V>(v), impl_);
    }

    friend DemandDistribution convolve(const DemandDistribution&, const DemandDistribution&);

public:
    static DemandDistribution truncated_normal(double mean, double variance,
                                               double lo, double hi) {
        return DemandDistribution(detail::TruncatedNormalImpl(mean, variance, lo, hi));
    }
    // Truncation convention used for scheduled demand: [max(0, mu-4sigma), mu+4sigma].
    static DemandDistribution truncated_normal_4sigma(double mean, double variance) {
        const double sigma = std::sqrt(variance);
        return truncated_normal(mean, variance, std::max(0.0, mean - 4.0 * sigma),
                                mean + 4.0 * sigma);
    }
    static DemandDistribution chi_square(double dof) {
        return DemandDistribution(detail::ChiSquareImpl(dof));
    }
    static DemandDistribution point_mass(double x0) {
        return DemandDistribution(detail::PointMassImpl(x0));
    }
    static DemandDistribution empirical_grid(double lo, double hi,
                                             std::vector<double> cdf_values) {
        return DemandDistribution(detail::EmpiricalGridImpl(lo, hi, std::move(cdf_values)));
    }
    // Tabulate an arbitrary cdf onto a uniform grid.
    static DemandDistribution tabulate(const std::function<double(double)>& cdf_fn,
                                       double lo, double hi, std::size_t points = 4096) {
        std::vector<double> c(points);
        const double h = (hi - lo) / static_cast<double>(points - 1);
        for (std::size_t i = 0; i < points; ++i)
            c[i] = cdf_fn(lo + h * static_cast<double>(i));
        return empirical_grid(lo, hi, std::move(c));
    }

    DistKind kind() const {
        return static_cast<DistKind>(impl_.index());
    }

    double lower() const {
        return visit([](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, detail::TruncatedNormalImpl>) return d.lo;
            else if constexpr (std::is_same_v<T, detail::ChiSquareImpl>) return 0.0;
            else if constexpr (std::is_same_v<T, detail::PointMassImpl>) return d.x0;
            else return d.lo;
        });
    }
    double upper() const {
        return visit([](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, detail::TruncatedNormalImpl>) return d.hi;
            else if constexpr (std::is_same_v<T, detail::ChiSquareImpl>)
                return std::numeric_limits<double>::infinity();
            else if constexpr (std::is_same_v<T, detail::PointMassImpl>) return d.x0;
            else return d.hi;
        });
    }
    // Finite stand-in for the upper support bound, used to size grids and
    // quadrature windows; the chi-square tail beyond it carries < 1e-10 mass.
    double grid_upper() const {
        if (kind() == DistKind::chi_square)
            return std::get<detail::ChiSquareImpl>(impl_).cap;
        return upper();
    }

    double mean() const {
        return visit([](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, detail::ChiSquareImpl>) return d.dof;
            else if constexpr (std::is_same_v<T, detail::PointMassImpl>) return d.x0;
            else return d.mean();
        });
    }
    double variance() const {
        return visit([](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, detail::ChiSquareImpl>) return 2.0 * d.dof;
            else if constexpr (std::is_same_v<T, detail::PointMassImpl>) return 0.0;
            else return d.variance();
        });
    }

    double pdf(double x) const {
        return visit([x](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, detail::PointMassImpl>)
                return x == d.x0 ? std::numeric_limits<double>::infinity() : 0.0;
            else
                return d.pdf(x);
        });
    }
    double cdf(double x) const {
        return visit([x](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, detail::PointMassImpl>)
                return x < d.x0 ? 0.0 : 1.0;
            else
                return d.cdf(x);
        });
    }
    // Smallest x with cdf(x) >= p.
    double quantile(double p) const {
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("quantile: p outside [0,1]");
        return visit([p](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, detail::PointMassImpl>) return d.x0;
            else if constexpr (std::is_same_v<T, detail::ChiSquareImpl>)
                return p >= 1.0 ? d.cap : d.quantile_newton(p);
            else
                return d.quantile(p);
        });
    }

    // E[min{X, a}] for a >= 0 and nonnegative support, via the tail-integral
    // identity E[min{X,a}] = int_0^a (1 - cdf(u)) du. Piecewise kinds are
    // integrated exactly; smooth kinds use adaptive Simpson (abs tol 1e-8).
    double partial_expectation(double a) const {
        if (a < 0.0)
            throw std::invalid_argument("partial_expectation: a must be nonnegative");
        if (lower() < 0.0)
            throw std::invalid_argument("partial_expectation: support must be nonnegative");
        if (a == 0.0) return 0.0;
        switch (kind()) {
            case DistKind::point_mass:
                return std::min(std::get<detail::PointMassImpl>(impl_).x0, a);
            case DistKind::empirical_grid: {
                const auto& d = std::get<detail::EmpiricalGridImpl>(impl_);
                return std::min(a, d.lo) + d.survival_integral(d.lo, a);
            }
            default: {
                const double start = lower();
                const double head = std::min(a, start);  // cdf == 0 below support
                if (a <= start) return head;
                return head + num::integrate(
                                  [this](double u) { return 1.0 - cdf(u); }, start, a,
                                  1e-8);
            }
        }
    }

    // Failure rate pdf / (1 - cdf); defined where the survival is above floor.
    double hazard(double x) const {
        const double surv = 1.0 - cdf(x);
        if (surv < detail::survival_floor)
            throw std::domain_error("hazard: survival below floor at x=" +
                                    std::to_string(x));
        return pdf(x) / surv;
    }

    // True iff the hazard is nondecreasing across an interior grid scan.
    bool is_ifr(std::size_t grid_points = 512) const {
        if (kind() == DistKind::point_mass) return true;
        const double a = quantile(1e-6);
        const double b = quantile(1.0 - 1e-6);
        if (!(b > a)) return true;
        const double h = (b - a) / static_cast<double>(grid_points - 1);
        double prev = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < grid_points; ++i) {
            const double x = a + h * static_cast<double>(i);
            double rate;
            try {
                rate = hazard(x);
            } catch (const std::domain_error&) {
                break;  // deep in the tail; nothing left to scan
            }
            if (rate < prev * (1.0 - 1e-9) - 1e-12) return false;
            prev = std::max(prev, rate);
        }
        return true;
    }

    // Inverse-transform sampling; deterministic for a fixed seed.
    std::vector<double> sample(std::uint64_t seed, std::size_t n) const {
        std::vector<double> out(n);
        std::mt19937_64 gen(seed);
        for (double& v : out) v = quantile(num::u01(gen));
        return out;
    }
    double sample_one(std::mt19937_64& gen) const { return quantile(num::u01(gen)); }

    // One-line parameter description, used in sidecar metadata files.
    std::string describe() const {
        std::ostringstream os;
        visit([&os](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, detail::TruncatedNormalImpl>)
                os << "truncated-normal mu=" << d.mu << " sigma2=" << d.sigma * d.sigma
                   << " lo=" << d.lo << " hi=" << d.hi;
            else if constexpr (std::is_same_v<T, detail::ChiSquareImpl>)
                os << "chi-square dof=" << d.dof;
            else if constexpr (std::is_same_v<T, detail::PointMassImpl>)
                os << "point-mass x0=" << d.x0;
            else
                os << "empirical-grid nodes=" << d.cdf_values.size() << " lo=" << d.lo
                   << " hi=" << d.hi;
        });
        return os.str();
    }

    // CSV round trip for empirical grids: header "x,cdf", one row per node.
    void save_grid_csv(const std::string& path) const;
    static DemandDistribution load_grid_csv(const std::string& path);
};

// Distribution of the sum of two independent demands, tabulated on a uniform
// 4096-node grid: H(t) = int G(t - x) f(x) dx.
inline DemandDistribution convolve(const DemandDistribution& f_dist,
                                   const DemandDistribution& g_dist) {
    constexpr std::size_t grid_points = 4096;

    if (f_dist.kind() == DistKind::point_mass && g_dist.kind() == DistKind::point_mass)
        return DemandDistribution::point_mass(f_dist.lower() + g_dist.lower());
    if (g_dist.kind() == DistKind::point_mass) return convolve(g_dist, f_dist);
    // integrate over the smooth factor's density when one side is tabulated
    if (f_dist.kind() == DistKind::empirical_grid &&
        g_dist.kind() != DistKind::empirical_grid)
        return convolve(g_dist, f_dist);
    if (f_dist.kind() == DistKind::point_mass) {
        const double shift = f_dist.lower();
        return DemandDistribution::tabulate(
            [&](double t) { return g_dist.cdf(t - shift); }, shift + g_dist.lower(),
            shift + g_dist.grid_upper(), grid_points);
    }

    const double f_lo = f_dist.lower(), f_hi = f_dist.grid_upper();
    const double lo = f_lo + g_dist.lower();
    const double hi = f_hi + g_dist.grid_upper();

    // fixed Gauss-Legendre nodes over F's support
    const auto& rule = num::gauss_legendre_256();
    const double half = 0.5 * (f_hi - f_lo);
    const double mid = 0.5 * (f_hi + f_lo);
    std::vector<double> xs(rule.nodes.size()), wf(rule.nodes.size());
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
        xs[j] = mid + half * rule.nodes[j];
        wf[j] = rule.weights[j] * half * f_dist.pdf(xs[j]);
    }

    std::vector<double> cdf(grid_points);
    const double step = (hi - lo) / static_cast<double>(grid_points - 1);
    for (std::size_t i = 0; i < grid_points; ++i) {
        const double t = lo + step * static_cast<double>(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < xs.size(); ++j) acc += wf[j] * g_dist.cdf(t - xs[j]);
        cdf[i] = acc;
    }
    return DemandDistribution::empirical_grid(lo, hi, std::move(cdf));
}

inline void DemandDistribution::save_grid_csv(const std::string& path) const {
    const detail::EmpiricalGridImpl* grid = std::get_if<detail::EmpiricalGridImpl>(&impl_);
    if (grid == nullptr)
        throw std::invalid_argument("save_grid_csv: only empirical-grid distributions serialize");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_grid_csv: cannot open " + path);
    out << "x,cdf\n";
    char buf[64];
    for (std::size_t i = 0; i < grid->cdf_values.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g,%.12g", grid->node(i), grid->cdf_values[i]);
        out << buf << '\n';
    }
}

inline DemandDistribution DemandDistribution::load_grid_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_grid_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "x,cdf")
        throw std::runtime_error("load_grid_csv: expected header 'x,cdf' in " + path);
    std::vector<double> xs, cs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("load_grid_csv: " + path + ":" +
                                     std::to_string(line_no) + ": missing comma");
        xs.push_back(std::stod(line.substr(0, comma)));
        cs.push_back(std::stod(line.substr(comma + 1)));
    }
    if (xs.size() < 2) throw std::runtime_error("load_grid_csv: too few rows in " + path);
    const double step = xs[1] - xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (std::abs((xs[i] - xs[i - 1]) - step) > 1e-6 * (1.0 + std::abs(step)))
            throw std::runtime_error("load_grid_csv: grid not uniform at line " +
                                     std::to_string(i + 2));
        if (cs[i] < cs[i - 1] - 1e-12)
            throw std::runtime_error("load_grid_csv: cdf decreases at line " +
                                     std::to_string(i + 2));
    }
    return empirical_grid(xs.front(), xs.back(), std::move(cs));
}

// Per-user bursty demand model: a user with channel gain |h|^2 ~ Exp(1)
// demands P * exp(-(1 + s/beta)) * |h|^2 / n0 units of bandwidth.
struct RandomUserModel {
    double beta;        // monetary income per unit data rate
    double s;           // market price per unit bandwidth
    double power;       // transmit power
    double noise;       // noise power per unit bandwidth
    std::size_t user_count = 1;

    RandomUserModel(double beta_, double s_, double power_, double noise_,
                    std::size_t user_count_ = 1)
        : beta(beta_), s(s_), power(power_), noise(noise_), user_count(user_count_) {
        if (!(beta > 0.0 && s > 0.0 && power > 0.0 && noise > 0.0))
            throw std::invalid_argument("RandomUserModel: fields must be strictly positive");
    }

    double per_user_mean() const {
        return power * std::exp(-(1.0 + s / beta)) / noise;
    }
};

inline double random_user_demand_draw(const RandomUserModel& model, std::mt19937_64& gen,
                                      std::size_t n_users) {
    const double scale = model.per_user_mean();
    double total = 0.0;
    for (std::size_t i = 0; i < n_users; ++i)
        total += scale * -std::log1p(-num::u01(gen));  // |h|^2 ~ Exp(1)
    return total;
}

// Aggregate demand of n_users random users; 0 when n_users == 0.
inline double random_user_demand(const RandomUserModel& model, std::uint64_t seed,
                                 std::size_t n_users) {
    std::mt19937_64 gen(seed);
    return random_user_demand_draw(model, gen, n_users);
}

}  // namespace specres
