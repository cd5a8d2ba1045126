#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "utilityforge/distributions.hpp"
#include "utilityforge/error.hpp"
#include "utilityforge/market.hpp"
#include "utilityforge/numerics.hpp"

namespace utilityforge {

/// Terminal consumption written as a measurable function of the kernel.
///
/// The function receives the kernel state (u, 1 - u, xi) so payoffs defined
/// through quantiles keep full precision in both tails. `u_breaks` lists
/// kernel-quantile levels where the payoff may jump.
class Payoff {
public:
    using StateFunction = std::function<double(const KernelState&)>;

    explicit Payoff(StateFunction fn, std::optional<Distribution> declared_law = std::nullopt,
                    std::vector<double> u_breaks = {})
        : fn_(std::move(fn)), declared_(std::move(declared_law)), breaks_(std::move(u_breaks))
    {}

    /// Payoff given as a plain function of the kernel value xi.
    static Payoff of_kernel(std::function<double(double)> f, std::optional<Distribution> declared_law = std::nullopt)
    {
        return Payoff([f = std::move(f)](const KernelState& s) { return f(s.xi); }, std::move(declared_law));
    }

    [[nodiscard]] double operator()(const KernelState& s) const { return fn_(s); }
    [[nodiscard]] double at_xi(const PricingKernel& k, double xi) const { return fn_(k.at_value(xi)); }

    [[nodiscard]] const std::optional<Distribution>& declared_law() const noexcept { return declared_; }
    [[nodiscard]] const std::vector<double>& u_breaks() const noexcept { return breaks_; }

private:
    StateFunction fn_;
    std::optional<Distribution> declared_;
    std::vector<double> breaks_;
};

struct EfficiencyReport {
    double cost = 0.0;
    double distributional_price = 0.0;
    bool is_antimonotone = false;
    bool is_efficient = false;
    double excess_cost = 0.0;
};

/// X* = F^{-1}(1 - F_xi(xi)): the cheapest payoff with law F.
inline Payoff efficient_payoff(const Distribution& F, const PricingKernel& k)
{
    (void)k;
    std::vector<double> breaks;
    for (const Atom& a : F.atoms()) {
        breaks.push_back(F.sf(a.location));
        breaks.push_back(std::min(1.0, F.sf(a.location) + a.mass));
    }
    auto fn = [F](const KernelState& s) {
        // F^{-1}(1 - u) with 1 - u = q
        if (s.u <= 0.5)
            return F.impl().upper_quantile(s.u);
        return F.impl().quantile(s.q);
    };
    return Payoff(fn, F, std::move(breaks));
}

namespace detail {

// u * |xi(u) X(u)| near both ends of the quantile space; a finite price
// needs these to vanish.
inline std::pair<double, double> tail_weights(const Payoff& x, const PricingKernel& k, double level)
{
    const KernelState lo = k.at(level);
    const KernelState hi = k.at_upper(level);
    return {level * std::abs(lo.xi * x(lo)), level * std::abs(hi.xi * x(hi))};
}

inline bool tail_diverges(const Payoff& x, const PricingKernel& k, double ratio_limit)
{
    const auto [lo_a, hi_a] = tail_weights(x, k, 1e-4);
    const auto [lo_b, hi_b] = tail_weights(x, k, 1e-16);
    if (!std::isfinite(lo_b) || !std::isfinite(hi_b))
        return true;
    auto bad = [ratio_limit](double a, double b) { return b > 0.0 && b >= ratio_limit * a; };
    return bad(lo_a, lo_b) || bad(hi_a, hi_b);
}

} // namespace detail

/// X_0 = E[xi_T X_T], integrated in kernel-quantile space.
inline double cost(const Payoff& x, const PricingKernel& k, const Tolerance& tol = {})
{
    if (detail::tail_diverges(x, k, 1.0))
        fail(ErrorCode::UnpricedTail, "payoff tail makes the price infinite");
    std::vector<double> lower_breaks, upper_breaks;
    for (double b : x.u_breaks()) {
        if (b > 0.0 && b < 0.5)
            lower_breaks.push_back(b);
        else if (b > 0.5 && b < 1.0)
            upper_breaks.push_back(1.0 - b);
    }
    auto lower = [&](double u) {
        const KernelState s = k.at(u);
        return s.xi * x(s);
    };
    auto upper = [&](double q) {
        const KernelState s = k.at_upper(q);
        return s.xi * x(s);
    };
    try {
        return integrate_pieces(lower, 0.0, 0.5, lower_breaks, tol)
            + integrate_pieces(upper, 0.0, 0.5, upper_breaks, tol);
    } catch (const Error& e) {
        if ((e.code() == ErrorCode::NonConvergence || e.code() == ErrorCode::NonFinite)
            && detail::tail_diverges(x, k, 1e-3))
            fail(ErrorCode::UnpricedTail, "payoff tail makes the price infinite");
        throw;
    }
}

/// Cost of the cost-efficient payoff with law F: the minimum price of any
/// payoff distributed as F.
inline double distributional_price(const Distribution& F, const PricingKernel& k, const Tolerance& tol = {})
{
    return cost(efficient_payoff(F, k), k, tol);
}

// ---------------------------------------------------------------------------
// Pushforward law of a payoff
// ---------------------------------------------------------------------------

namespace laws {

class Pushforward final : public LawImpl {
public:
    enum class Direction { decreasing, increasing, none };

    Pushforward(Payoff x, PricingKernel k, Direction dir)
        : x_(std::move(x)), k_(std::move(k)), dir_(dir)
    {
        if (dir_ == Direction::none) {
            constexpr std::size_t n = 1u << 16;
            samples_.resize(n);
            for (std::size_t i = 0; i < n; ++i)
                samples_[i] = x_(k_.at((static_cast<double>(i) + 0.5) / static_cast<double>(n)));
            std::sort(samples_.begin(), samples_.end());
        }
    }

    std::string name() const override { return "pushforward"; }
    LawKind kind() const override { return LawKind::continuous; }
    // For monotone payoffs the support ends are the payoff values at the
    // extreme representable kernel levels, an inner approximation.
    Support support() const override
    {
        if (dir_ == Direction::none)
            return {samples_.front(), samples_.back()};
        const double at_lo = x_(k_.at(1e-300));
        const double at_hi = x_(k_.at_upper(1e-300));
        return {std::min(at_lo, at_hi), std::max(at_lo, at_hi)};
    }

    double cdf(double v) const override
    {
        if (dir_ == Direction::none) {
            const auto it = std::upper_bound(samples_.begin(), samples_.end(), v);
            return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
        }
        // measure of {u : x(u) <= v}
        const double edge = boundary(v);
        return dir_ == Direction::decreasing ? 1.0 - edge : edge;
    }

    double sf(double v) const override
    {
        if (dir_ == Direction::none)
            return 1.0 - cdf(v);
        const double edge = boundary(v);
        return dir_ == Direction::decreasing ? edge : 1.0 - edge;
    }

private:
    // Level u* splitting {x <= v} from {x > v} for a monotone payoff.
    double boundary(double v) const
    {
        auto below = [&](double u) { return x_(k_.at(u)) <= v; };
        double lo = 0.0, hi = 1.0;
        for (int i = 0; i < 200 && hi - lo > 1e-17; ++i) {
            const double mid = 0.5 * (lo + hi);
            const bool in = below(mid);
            if ((dir_ == Direction::decreasing) == in)
                hi = mid;
            else
                lo = mid;
        }
        return 0.5 * (lo + hi);
    }

    Payoff x_;
    PricingKernel k_;
    Direction dir_;
    std::vector<double> samples_;
};

} // namespace laws

/// Payoff values on the default audit grid u in [1e-4, 1 - 1e-4].
inline std::vector<double> audit_samples(const Payoff& x, const PricingKernel& k, std::size_t n = 1001)
{
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = 1e-4 + (1.0 - 2e-4) * static_cast<double>(i) / static_cast<double>(n - 1);
        out[i] = x(k.at(u));
    }
    return out;
}

inline bool is_non_increasing(const std::vector<double>& v)
{
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[i - 1] + 1e-12 * std::max(1.0, std::abs(v[i - 1])))
            return false;
    return true;
}

inline bool is_non_decreasing(const std::vector<double>& v)
{
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[i - 1] - 1e-12 * std::max(1.0, std::abs(v[i - 1])))
            return false;
    return true;
}

/// Law of X_T under the physical measure, i.e. of u -> x(u) with u uniform.
inline Distribution pushforward(const Payoff& x, const PricingKernel& k)
{
    const auto samples = audit_samples(x, k);
    auto dir = laws::Pushforward::Direction::none;
    if (is_non_increasing(samples))
        dir = laws::Pushforward::Direction::decreasing;
    else if (is_non_decreasing(samples))
        dir = laws::Pushforward::Direction::increasing;
    return Distribution(std::make_shared<laws::Pushforward>(x, k, dir));
}

/// Cost-efficiency audit: price, distributional price and the
/// anti-monotonicity verdict on the grid-sampled payoff.
inline EfficiencyReport audit(const Payoff& x, const PricingKernel& k, const Tolerance& tol = {})
{
    EfficiencyReport rep;
    rep.cost = cost(x, k, tol);
    rep.is_antimonotone = is_non_increasing(audit_samples(x, k));
    if (x.declared_law()) {
        rep.distributional_price = distributional_price(*x.declared_law(), k, tol);
        rep.excess_cost = rep.cost - rep.distributional_price;
    } else {
        // Same midpoint discretisation for both sides so the rearrangement
        // inequality holds exactly.
        constexpr std::size_t n = 1u << 16;
        std::vector<double> xi(n), vals(n);
        for (std::size_t i = 0; i < n; ++i) {
            const KernelState s = k.at((static_cast<double>(i) + 0.5) / static_cast<double>(n));
            xi[i] = s.xi;
            vals[i] = x(s);
        }
        std::vector<double> sorted = vals;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        double excess = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            excess += xi[i] * (vals[i] - sorted[i]);
        rep.excess_cost = std::max(0.0, excess / static_cast<double>(n));
        rep.distributional_price = rep.cost - rep.excess_cost;
    }
    const double slack = std::max(1e-8, 1e-8 * std::abs(rep.cost));
    rep.is_efficient = rep.excess_cost <= slack;
    return rep;
}

/// Measure-preserving rearrangement: kernel-quantile band i of width 1/n is
/// filled with the payoff values of band perm[i].
inline Payoff rearrange_bands(const Payoff& x, const PricingKernel& k, std::vector<std::size_t> perm)
{
    const std::size_t n = perm.size();
    if (n == 0)
        fail(ErrorCode::InvalidParameter, "empty band permutation");
    std::vector<double> breaks;
    for (std::size_t i = 1; i < n; ++i)
        breaks.push_back(static_cast<double>(i) / static_cast<double>(n));
    for (double b : x.u_breaks())
        breaks.push_back(b); // conservative: original jump levels
    auto fn = [x, k, perm, n](const KernelState& s) {
        const double width = 1.0 / static_cast<double>(n);
        auto band = static_cast<std::size_t>(s.u * static_cast<double>(n));
        band = std::min(band, n - 1);
        const std::size_t target = perm[band];
        if (target == band)
            return x(s);
        // band edges have measure zero; keep the image strictly inside (0,1)
        constexpr double tiny = std::numeric_limits<double>::min();
        const double u2 = static_cast<double>(target) * width + (s.u - static_cast<double>(band) * width);
        if (u2 <= 0.5)
            return x(k.at(std::max(u2, tiny)));
        // upper half: measure from the top so deep tails keep their resolution
        const double q2 = static_cast<double>(n - 1 - target) * width + (s.q - static_cast<double>(n - 1 - band) * width);
        return x(k.at_upper(std::max(q2, tiny)));
    };
    return Payoff(std::move(fn), x.declared_law(), std::move(breaks));
}

} // namespace utilityforge
