#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "utilityforge/distributions.hpp"
#include "utilityforge/error.hpp"
#include "utilityforge/market.hpp"
#include "utilityforge/numerics.hpp"

namespace utilityforge {

/// Dead zone for strict convexity of the normalized transform.
inline constexpr double kConvexityEps = 1e-9;

struct RiskAversionProfile {
    std::vector<double> x;
    std::vector<double> p;
    std::vector<double> ara;
    std::vector<double> rra;
};

enum class DaraCriterion { transform_convexity, bs_convexity, hazard_sufficient };

inline constexpr std::string_view to_string(DaraCriterion c) noexcept
{
    switch (c) {
    case DaraCriterion::transform_convexity: return "transform-convexity";
    case DaraCriterion::bs_convexity: return "bs-convexity";
    case DaraCriterion::hazard_sufficient: return "hazard-sufficient";
    }
    return "unknown";
}

struct DaraVerdict {
    bool is_dara = false;
    bool is_asymptotic_dara = false;
    DaraCriterion criterion_used = DaraCriterion::transform_convexity;
    std::optional<double> witness;
    /// Minimum of k''/k' over the grid (finite differences); for the hazard
    /// test the minimum relative decrease rate of the hazard.
    double margin = 0.0;
    /// Same quantity from the density form, or from the log-survival
    /// second differences in the hazard test.
    double check_margin = 0.0;
    /// Start of the longest grid suffix with positive margin, if any.
    std::optional<double> asymptotic_from;
    bool checks_agree = true;
};

/// Absolute risk aversion f(x) / g(G^{-1}(F(x))), G the law of -log xi.
inline double ara(const Distribution& F, const PricingKernel& k, double x)
{
    if (!std::isfinite(x))
        fail(ErrorCode::UndefinedAt, "wealth level must be finite");
    if (F.atom_mass(x) > 0.0)
        fail(ErrorCode::UndefinedAt, "F has an atom at x = " + std::to_string(x));
    const double p = F.cdf(x);
    const double q = F.sf(x);
    if (!(p > 0.0) || !(q > 0.0))
        fail(ErrorCode::UndefinedAt, "F(x) must lie in (0,1) at x = " + std::to_string(x));
    const auto f = F.density(x);
    if (!f || !std::isfinite(*f))
        fail(ErrorCode::UndefinedAt, "no density at x = " + std::to_string(x));
    const Distribution& G = k.h_law();
    const double y = p <= 0.5 ? G.impl().quantile(p) : G.impl().upper_quantile(q);
    const auto g = G.density(y);
    if (!g || !(*g > 0.0))
        fail(ErrorCode::UndefinedAt, "kernel density vanishes at the matching level");
    return *f / *g;
}

inline double rra(const Distribution& F, const PricingKernel& k, double x) { return x * ara(F, k, x); }

inline RiskAversionProfile risk_aversion_profile(const Distribution& F, const PricingKernel& k, const Grid& grid)
{
    RiskAversionProfile out;
    for (double x : grid) {
        const double a = ara(F, k, x);
        out.x.push_back(x);
        out.p.push_back(F.cdf(x));
        out.ara.push_back(a);
        out.rra.push_back(x * a);
    }
    return out;
}

/// 201 F-quantiles for p in [0.005, 0.995].
inline Grid default_wealth_grid(const Distribution& F) { return quantile_grid(F, 0.005, 0.995, 201); }

namespace detail {

// F^{-1}(G(y)) evaluated from whichever tail keeps precision.
inline double transform(const Distribution& F, const Distribution& G, double y)
{
    const double p = G.cdf(y);
    const double q = G.sf(y);
    if (!(p > 0.0) || !(q > 0.0))
        fail(ErrorCode::UndefinedAt, "grid point y = " + std::to_string(y) + " leaves the support of G");
    const double x = p <= 0.5 ? F.impl().quantile(p) : F.impl().upper_quantile(q);
    if (!std::isfinite(x))
        fail(ErrorCode::UndefinedAt, "F^{-1}(G(y)) is not finite at y = " + std::to_string(y));
    return x;
}

struct SuffixScan {
    double min = kInf;
    std::size_t argmin = 0;
    std::optional<std::size_t> suffix_start;
};

// m[i] indexed by interior grid points; suffix = trailing run above eps.
inline SuffixScan scan(const std::vector<double>& m)
{
    SuffixScan s;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] < s.min) {
            s.min = m[i];
            s.argmin = i;
        }
    }
    std::size_t start = m.size();
    while (start > 0 && m[start - 1] > kConvexityEps)
        --start;
    if (start < m.size())
        s.suffix_start = start;
    return s;
}

inline DaraVerdict convexity_verdict(const Distribution& F, const Distribution& G, const Grid& grid, DaraCriterion crit)
{
    const auto y = grid.points();
    if (y.size() < 3)
        fail(ErrorCode::InvalidParameter, "DARA test needs at least 3 grid points");
    std::vector<double> k(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        k[i] = transform(F, G, y[i]);

    // k''/k' from divided differences, and from the density form
    // g(y) (g'/g^2 at y - f'/f^2 at k(y))
    std::vector<double> fd, an;
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
        const double d2 = second_divided_difference(y[i - 1], y[i], y[i + 1], k[i - 1], k[i], k[i + 1]);
        const double d1 = (k[i + 1] - k[i - 1]) / (y[i + 1] - y[i - 1]);
        if (!(d1 > 0.0))
            fd.push_back(d1 == 0.0 ? 0.0 : -kInf);
        else
            fd.push_back(d2 / d1);

        const auto g = G.density(y[i]);
        const auto gp = G.density_derivative(y[i]);
        const auto f = F.density(k[i]);
        const auto fp = F.density_derivative(k[i]);
        if (g && gp && f && fp && *f > 0.0 && *g > 0.0)
            an.push_back(*gp / *g - *fp * *g / (*f * *f));
        else
            an.push_back(fd.back());
    }

    const SuffixScan s = scan(fd);
    const SuffixScan sa = scan(an);
    DaraVerdict v;
    v.criterion_used = crit;
    v.margin = s.min;
    v.check_margin = sa.min;
    v.is_dara = s.min > kConvexityEps;
    v.is_asymptotic_dara = s.suffix_start.has_value();
    if (s.suffix_start)
        v.asymptotic_from = y[*s.suffix_start + 1];
    if (!v.is_dara)
        v.witness = y[s.argmin + 1];
    v.checks_agree = (sa.min > kConvexityEps) == v.is_dara;
    return v;
}

} // namespace detail

/// DARA test through strict convexity of y -> F^{-1}(G(y)) on a y-grid.
inline DaraVerdict dara_general(const Distribution& F, const Distribution& G, const Grid& grid)
{
    return detail::convexity_verdict(F, G, grid, DaraCriterion::transform_convexity);
}

/// dara_general with G the law of -log xi; the wealth grid is carried to
/// H-space through y = G^{-1}(F(x)).
inline DaraVerdict dara_kernel(const Distribution& F, const PricingKernel& k, const Grid& wealth_grid)
{
    const Distribution& G = k.h_law();
    std::vector<double> ys;
    for (double x : wealth_grid) {
        const double p = F.cdf(x);
        const double q = F.sf(x);
        if (!(p > 0.0) || !(q > 0.0))
            fail(ErrorCode::UndefinedAt, "F(x) must lie in (0,1) at x = " + std::to_string(x));
        const double y = p <= 0.5 ? G.impl().quantile(p) : G.impl().upper_quantile(q);
        if (ys.empty() || y > ys.back())
            ys.push_back(y);
    }
    return dara_general(F, G, Grid(std::move(ys)));
}

/// Black-Scholes specialization: G standard normal. The wealth grid is
/// mapped to y = Phi^{-1}(F(x)); the verdict is the convexity of
/// F^{-1}(Phi(y)), cross-checked against monotonicity of the ratio
/// f(F^{-1}(p)) / phi(Phi^{-1}(p)).
inline DaraVerdict dara_bs(const Distribution& F, const Grid& wealth_grid)
{
    std::vector<double> ys;
    std::vector<double> log_ratio;
    for (double x : wealth_grid) {
        const double p = F.cdf(x);
        const double q = F.sf(x);
        if (!(p > 0.0) || !(q > 0.0))
            fail(ErrorCode::UndefinedAt, "F(x) must lie in (0,1) at x = " + std::to_string(x));
        const double y = p <= 0.5 ? normal_quantile(p) : normal_upper_quantile(q);
        if (!ys.empty() && !(y > ys.back()))
            continue;
        const auto f = F.density(x);
        if (!f || !(*f > 0.0))
            fail(ErrorCode::UndefinedAt, "no positive density at x = " + std::to_string(x));
        ys.push_back(y);
        log_ratio.push_back(std::log(*f) - std::log(normal_pdf(y)));
    }
    const Grid ygrid(ys);
    DaraVerdict v = detail::convexity_verdict(F, normal(0.0, 1.0), ygrid, DaraCriterion::bs_convexity);

    // -d log(ratio)/dy equals k''/k'; strictly decreasing ratio <=> DARA
    double ratio_min = kInf;
    for (std::size_t i = 0; i + 1 < ys.size(); ++i)
        ratio_min = std::min(ratio_min, -(log_ratio[i + 1] - log_ratio[i]) / (ys[i + 1] - ys[i]));
    v.check_margin = std::min(v.check_margin, ratio_min);
    v.checks_agree = v.checks_agree && ((ratio_min > kConvexityEps) == v.is_dara);
    return v;
}

inline DaraVerdict dara_bs(const Distribution& F) { return dara_bs(F, default_wealth_grid(F)); }

/// Sufficient condition: hazard non-increasing (equivalently 1 - F
/// log-convex) on the wealth grid.
inline DaraVerdict dara_hazard_sufficient(const Distribution& F, const Grid& grid)
{
    const auto x = grid.points();
    std::vector<double> h(x.size()), logs(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = F.sf(x[i]);
        if (!(s > 0.0))
            fail(ErrorCode::UndefinedAt, "F(x) = 1 at x = " + std::to_string(x[i]));
        try {
            h[i] = hazard(F, x[i]);
        } catch (const Error& e) {
            fail(ErrorCode::UndefinedAt, e.detail());
        }
        logs[i] = std::log(s);
    }
    // relative decrease rate of the hazard between neighbours
    std::vector<double> rate;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double drop = h[i] - h[i + 1];
        const double scale = std::max(h[i], h[i + 1]) * (x[i + 1] - x[i]);
        double r = drop / scale;
        // flat hazard up to rounding counts as non-increasing
        if (std::abs(drop) <= kConvexityEps * std::max(h[i], h[i + 1]))
            r = 0.0;
        rate.push_back(r);
    }
    // log-convexity of the survival function, normalized by the slope
    double convex_min = kInf;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        const double d2 = second_divided_difference(x[i - 1], x[i], x[i + 1], logs[i - 1], logs[i], logs[i + 1]);
        const double d1 = std::abs(logs[i + 1] - logs[i - 1]) / (x[i + 1] - x[i - 1]);
        convex_min = std::min(convex_min, d1 > 0.0 ? d2 / d1 : 0.0);
    }

    DaraVerdict v;
    v.criterion_used = DaraCriterion::hazard_sufficient;
    double worst = kInf;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < rate.size(); ++i) {
        if (rate[i] < worst) {
            worst = rate[i];
            arg = i;
        }
    }
    v.margin = worst;
    v.check_margin = convex_min;
    v.is_dara = worst >= 0.0;
    std::size_t start = rate.size();
    while (start > 0 && rate[start - 1] >= 0.0)
        --start;
    v.is_asymptotic_dara = start < rate.size();
    if (v.is_asymptotic_dara)
        v.asymptotic_from = x[start];
    if (!v.is_dara)
        v.witness = x[arg + 1];
    // rounding in the second differences of log(1 - F) sets the dead zone
    v.checks_agree = (convex_min >= -1e-6) == v.is_dara;
    return v;
}

inline DaraVerdict dara_hazard_sufficient(const Distribution& F) { return dara_hazard_sufficient(F, default_wealth_grid(F)); }

} // namespace utilityforge
