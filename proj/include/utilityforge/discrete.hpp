#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/rational.hpp>

#include "utilityforge/error.hpp"

namespace utilityforge {

using Rational = boost::rational<long long>;

namespace detail {

template <class T>
double as_double(const T& v)
{
    if constexpr (std::is_floating_point_v<T>)
        return static_cast<double>(v);
    else
        return boost::rational_cast<double>(v);
}

} // namespace detail

/// N-state market; state i costs p_i * xi_i per unit of consumption.
template <class T>
class BasicDiscreteMarket {
public:
    BasicDiscreteMarket(std::vector<T> xi, std::vector<T> probs)
        : xi_(std::move(xi)), probs_(std::move(probs))
    {
        if (xi_.empty())
            fail(ErrorCode::InvalidParameter, "market needs at least one state");
        if (probs_.size() != xi_.size())
            fail(ErrorCode::InvalidParameter, "xi and probabilities differ in length");
        double total = 0.0;
        for (std::size_t i = 0; i < xi_.size(); ++i) {
            const double x = detail::as_double(xi_[i]);
            const double p = detail::as_double(probs_[i]);
            if (!(x > 0.0) || !std::isfinite(x))
                fail(ErrorCode::InvalidParameter, "state prices xi must be positive");
            if (!(p > 0.0 && p <= 1.0))
                fail(ErrorCode::InvalidParameter, "probabilities must lie in (0,1]");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12)
            fail(ErrorCode::InvalidParameter, "probabilities must sum to 1");
        order_.resize(xi_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::stable_sort(order_.begin(), order_.end(), [this](std::size_t a, std::size_t b) { return xi_[b] < xi_[a]; });
    }

    static BasicDiscreteMarket equiprobable(std::vector<T> xi)
    {
        const std::size_t n = xi.size();
        if (n == 0)
            fail(ErrorCode::InvalidParameter, "market needs at least one state");
        std::vector<T> probs(n, T(1) / T(static_cast<long long>(n)));
        return BasicDiscreteMarket(std::move(xi), std::move(probs));
    }

    [[nodiscard]] std::size_t size() const noexcept { return xi_.size(); }
    [[nodiscard]] const std::vector<T>& xi() const noexcept { return xi_; }
    [[nodiscard]] const std::vector<T>& probs() const noexcept { return probs_; }
    /// State indices sorted by xi descending (stable).
    [[nodiscard]] const std::vector<std::size_t>& order() const noexcept { return order_; }

    [[nodiscard]] bool is_equiprobable() const
    {
        const double p0 = detail::as_double(probs_.front());
        for (const T& p : probs_)
            if (std::abs(detail::as_double(p) - p0) > 1e-12)
                return false;
        return true;
    }

    /// sum_i p_i xi_i x_i
    [[nodiscard]] T cost(const std::vector<T>& x) const
    {
        if (x.size() != size())
            fail(ErrorCode::InfeasibleAllocation, "allocation length does not match the market");
        T total(0);
        for (std::size_t i = 0; i < x.size(); ++i)
            total += probs_[i] * xi_[i] * x[i];
        return total;
    }

    [[nodiscard]] T expectation(const std::vector<T>& values) const
    {
        T total(0);
        for (std::size_t i = 0; i < values.size(); ++i)
            total += probs_[i] * values[i];
        return total;
    }

private:
    std::vector<T> xi_;
    std::vector<T> probs_;
    std::vector<std::size_t> order_;
};

using DiscreteMarket = BasicDiscreteMarket<double>;
using RationalMarket = BasicDiscreteMarket<Rational>;

/// Consumption per state, in the market's state order.
template <class T>
struct BasicAllocation {
    std::vector<T> x;
};

using Allocation = BasicAllocation<double>;

/// Permutation of the allocation's values that is ordered inversely to xi.
/// States with tied xi keep the relative order of their original values.
template <class T>
BasicAllocation<T> rearrange_antimonotone(const BasicDiscreteMarket<T>& m, const BasicAllocation<T>& alloc)
{
    if (!m.is_equiprobable())
        fail(ErrorCode::NotEquiprobable, "rearrangement needs equiprobable states");
    const std::size_t n = m.size();
    if (alloc.x.size() != n)
        fail(ErrorCode::InfeasibleAllocation, "allocation length does not match the market");
    const auto& xi = m.xi();

    std::vector<std::size_t> states(n);
    std::iota(states.begin(), states.end(), std::size_t{0});
    std::stable_sort(states.begin(), states.end(), [&](std::size_t a, std::size_t b) { return xi[a] < xi[b]; });
    std::vector<T> values = alloc.x;
    std::sort(values.begin(), values.end(), [](const T& a, const T& b) { return b < a; });

    BasicAllocation<T> out{std::vector<T>(n)};
    std::size_t pos = 0;
    while (pos < n) {
        std::size_t end = pos + 1;
        while (end < n && !(xi[states[pos]] < xi[states[end]]))
            ++end;
        // tie group: hand its values out in the order of the original ones
        std::vector<std::size_t> group(states.begin() + static_cast<std::ptrdiff_t>(pos),
                                       states.begin() + static_cast<std::ptrdiff_t>(end));
        std::stable_sort(group.begin(), group.end(), [&](std::size_t a, std::size_t b) { return alloc.x[b] < alloc.x[a]; });
        for (std::size_t j = 0; j < group.size(); ++j)
            out.x[group[j]] = values[pos + j];
        pos = end;
    }
    return out;
}

template <class T>
struct PermutationCheck {
    T antimonotone_cost;
    T min_cost;
    std::size_t permutations = 0;
    bool antimonotone_is_minimal = false;
};

/// Exhaustive search over all N! arrangements of the allocation's values.
template <class T>
PermutationCheck<T> check_all_permutations(const BasicDiscreteMarket<T>& m, const BasicAllocation<T>& alloc)
{
    if (m.size() > 9)
        fail(ErrorCode::InvalidParameter, "exhaustive permutation check limited to N <= 9");
    const BasicAllocation<T> anti = rearrange_antimonotone(m, alloc);
    PermutationCheck<T> out{m.cost(anti.x), m.cost(anti.x), 0, false};
    std::vector<T> perm = alloc.x;
    std::sort(perm.begin(), perm.end());
    do {
        const T c = m.cost(perm);
        if (c < out.min_cost)
            out.min_cost = c;
        ++out.permutations;
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.antimonotone_is_minimal = !(out.min_cost < out.antimonotone_cost);
    return out;
}

enum class PiecewiseKind { paper_step, peleg_yaari };

inline std::string to_string(PiecewiseKind k) { return k == PiecewiseKind::paper_step ? "paper-step" : "peleg-yaari"; }

/// Concave utility whose derivative is affine on each of the N+1 segments
/// cut by the knots x_1* < ... < x_N*. Segment 0 is (-inf, x_1*), segment j
/// is [x_j*, x_{j+1}*), segment N is [x_N*, inf).
template <class T>
class BasicPiecewiseUtility {
public:
    struct Segment {
        T ref;   ///< reference point (x_1* for segment 0, else the start)
        T d;     ///< derivative at ref
        T e;     ///< slope of the derivative
        T value; ///< utility at ref
    };

    BasicPiecewiseUtility(PiecewiseKind kind, std::vector<T> knots, std::vector<Segment> segs)
        : kind_(kind), knots_(std::move(knots)), segs_(std::move(segs))
    {}

    [[nodiscard]] PiecewiseKind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::vector<T>& breakpoints() const noexcept { return knots_; }
    [[nodiscard]] const std::vector<Segment>& segments() const noexcept { return segs_; }

    /// Constant slopes per segment (paper-step curves).
    [[nodiscard]] std::vector<T> slopes() const
    {
        std::vector<T> out;
        for (const Segment& s : segs_)
            out.push_back(s.d);
        return out;
    }

    [[nodiscard]] T value(const T& x) const { return eval(segs_[count_le(x)], x); }
    [[nodiscard]] T left_derivative(const T& x) const { return deriv(segs_[count_lt(x)], x); }
    [[nodiscard]] T right_derivative(const T& x) const { return deriv(segs_[count_le(x)], x); }

private:
    static T eval(const Segment& s, const T& x)
    {
        const T h = x - s.ref;
        return s.value + s.d * h + s.e * h * h / T(2);
    }
    static T deriv(const Segment& s, const T& x) { return s.d + s.e * (x - s.ref); }

    std::size_t count_le(const T& x) const
    {
        return static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin());
    }
    std::size_t count_lt(const T& x) const
    {
        return static_cast<std::size_t>(std::lower_bound(knots_.begin(), knots_.end(), x) - knots_.begin());
    }

    PiecewiseKind kind_;
    std::vector<T> knots_;
    std::vector<Segment> segs_;
};

using PiecewiseUtility = BasicPiecewiseUtility<double>;

namespace detail {

// Knots x* ascending and kernel values descending; both strict.
template <class T>
std::pair<std::vector<T>, std::vector<T>> strict_levels(const BasicDiscreteMarket<T>& m, const BasicAllocation<T>& xstar)
{
    if (!m.is_equiprobable())
        fail(ErrorCode::NotEquiprobable, "the construction needs equiprobable states");
    if (xstar.x.size() != m.size())
        fail(ErrorCode::InfeasibleAllocation, "allocation length does not match the market");
    std::vector<T> x = xstar.x;
    std::vector<T> xi = m.xi();
    std::sort(x.begin(), x.end());
    std::sort(xi.begin(), xi.end(), [](const T& a, const T& b) { return b < a; });
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (!(x[i - 1] < x[i]))
            fail(ErrorCode::NonStrictOrder, "optimal consumption has tied values");
        if (!(xi[i] < xi[i - 1]))
            fail(ErrorCode::NonStrictOrder, "state prices have tied values");
    }
    return {std::move(x), std::move(xi)};
}

template <class T>
void chain_values(std::vector<typename BasicPiecewiseUtility<T>::Segment>& segs, const std::vector<T>& knots)
{
    // segment 0 and 1 share the reference x_1*
    segs[0].value = T(0);
    if (segs.size() > 1)
        segs[1].value = T(0);
    for (std::size_t j = 1; j + 1 < segs.size(); ++j) {
        const T h = knots[j] - knots[j - 1];
        segs[j + 1].value = segs[j].value + segs[j].d * h + segs[j].e * h * h / T(2);
    }
}

} // namespace detail

/// Slope xi_1 below x_1*, xi_{i+1} on [x_i*, x_{i+1}*), 0 above x_N*;
/// U(x_1*) = 0.
template <class T>
BasicPiecewiseUtility<T> paper_step_utility(const BasicDiscreteMarket<T>& m, const BasicAllocation<T>& xstar)
{
    using Seg = typename BasicPiecewiseUtility<T>::Segment;
    auto [x, xi] = detail::strict_levels(m, xstar);
    const std::size_t n = x.size();
    std::vector<Seg> segs(n + 1);
    segs[0] = {x[0], xi[0], T(0), T(0)};
    for (std::size_t j = 1; j <= n; ++j)
        segs[j] = {x[j - 1], j < n ? xi[j] : T(0), T(0), T(0)};
    detail::chain_values<T>(segs, x);
    return BasicPiecewiseUtility<T>(PiecewiseKind::paper_step, std::move(x), std::move(segs));
}

/// U_P(x) = int_0^x v(y) dy with v(y) = xi_1 - y + x_1* below x_1*, linear
/// between the points (x_j*, xi_j), and xi_N above x_N*.
template <class T>
BasicPiecewiseUtility<T> peleg_yaari_utility(const BasicDiscreteMarket<T>& m, const BasicAllocation<T>& xstar)
{
    using Seg = typename BasicPiecewiseUtility<T>::Segment;
    auto [x, xi] = detail::strict_levels(m, xstar);
    const std::size_t n = x.size();
    std::vector<Seg> segs(n + 1);
    segs[0] = {x[0], xi[0], T(-1), T(0)};
    for (std::size_t j = 1; j < n; ++j)
        segs[j] = {x[j - 1], xi[j - 1], (xi[j] - xi[j - 1]) / (x[j] - x[j - 1]), T(0)};
    segs[n] = {x[n - 1], xi[n - 1], T(0), T(0)};
    detail::chain_values<T>(segs, x);
    // shift so that U_P(0) = 0
    const BasicPiecewiseUtility<T> raw(PiecewiseKind::peleg_yaari, x, segs);
    const T at_zero = raw.value(T(0));
    for (Seg& s : segs)
        s.value -= at_zero;
    return BasicPiecewiseUtility<T>(PiecewiseKind::peleg_yaari, std::move(x), std::move(segs));
}

struct PathwiseViolation {
    std::size_t state;
    double z;
    double gap;
};

struct OptimalityReport {
    bool ok = true;
    std::vector<PathwiseViolation> pathwise_violations;
    std::size_t pathwise_points = 0;
    std::size_t trials = 0;
    std::size_t random_violations = 0;
    double worst_random_gap = -std::numeric_limits<double>::infinity();
    double expected_utility = 0.0;
    double budget = 0.0;
};

/// Pathwise check of U(x_i*) - xi_i x_i* >= U(z) - xi_i z on a dense grid,
/// then `trials` random budget-matched challengers against E[U(X*)].
inline OptimalityReport verify_optimality(const DiscreteMarket& m, const PiecewiseUtility& u, const Allocation& xstar,
                                          std::size_t trials, std::uint64_t seed = 0)
{
    const std::size_t n = m.size();
    if (xstar.x.size() != n)
        fail(ErrorCode::InfeasibleAllocation, "allocation length does not match the market");
    for (double v : xstar.x)
        if (!std::isfinite(v))
            fail(ErrorCode::InfeasibleAllocation, "allocation must be finite");
    OptimalityReport rep;
    rep.budget = m.cost(xstar.x);
    if (!std::isfinite(rep.budget))
        fail(ErrorCode::InfeasibleAllocation, "allocation cost is not finite");

    const auto& xi = m.xi();
    const auto [lo_it, hi_it] = std::minmax_element(xstar.x.begin(), xstar.x.end());
    const double span = std::max(1.0, *hi_it - *lo_it);
    std::vector<double> zs;
    constexpr std::size_t dense = 4001;
    const double z_lo = *lo_it - span, z_hi = *hi_it + span;
    for (std::size_t i = 0; i < dense; ++i)
        zs.push_back(z_lo + (z_hi - z_lo) * static_cast<double>(i) / static_cast<double>(dense - 1));
    for (double b : u.breakpoints())
        zs.push_back(b);
    rep.pathwise_points = zs.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double best = u.value(xstar.x[i]) - xi[i] * xstar.x[i];
        double worst_gap = 0.0, worst_z = 0.0;
        for (double z : zs) {
            const double gap = u.value(z) - xi[i] * z - best;
            if (gap > worst_gap) {
                worst_gap = gap;
                worst_z = z;
            }
        }
        if (worst_gap > 1e-12 * std::max(1.0, std::abs(best)))
            rep.pathwise_violations.push_back({i, worst_z, worst_gap});
    }

    std::vector<double> ustar(n);
    for (std::size_t i = 0; i < n; ++i)
        ustar[i] = u.value(xstar.x[i]);
    rep.expected_utility = m.expectation(ustar);

    // Dirichlet-shaped perturbations of x*, projected back on the budget
    // hyperplane sum p_i xi_i y_i = X0. The curves live on the whole line
    // so no clipping is needed.
    std::mt19937_64 rng(seed);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> a(n);
    double a2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = m.probs()[i] * xi[i];
        a2 += a[i] * a[i];
    }
    std::vector<double> y(n), w(n), uy(n);
    for (std::size_t t = 0; t < trials; ++t) {
        double wsum = 0.0;
        for (double& wi : w) {
            wi = gamma(rng);
            wsum += wi;
        }
        const double radius = span * std::pow(10.0, -6.0 + 6.5 * unit(rng));
        for (std::size_t i = 0; i < n; ++i)
            y[i] = xstar.x[i] + radius * (w[i] / wsum - 1.0 / static_cast<double>(n)) * static_cast<double>(n);
        const double excess = m.cost(y) - rep.budget;
        for (std::size_t i = 0; i < n; ++i)
            y[i] -= excess / a2 * a[i];
        for (std::size_t i = 0; i < n; ++i)
            uy[i] = u.value(y[i]);
        const double gap = m.expectation(uy) - rep.expected_utility;
        rep.worst_random_gap = std::max(rep.worst_random_gap, gap);
        if (gap > 1e-10)
            ++rep.random_violations;
    }
    rep.trials = trials;
    rep.ok = rep.pathwise_violations.empty() && rep.random_violations == 0;
    return rep;
}

struct CounterexampleReport {
    Rational cost_xstar;
    Rational cost_y;
    Rational expected_utility_xstar;
    Rational expected_utility_y_bound;
    Rational u_at_8_9_bound;
    std::size_t random_utilities = 0;
    double min_random_expected_utility_y = std::numeric_limits<double>::infinity();
    bool holds = false;
};

/// Two states with P = (1/3, 2/3) and xi = (3/4, 9/8): X* = (0, 4/3) and
/// Y = (4/3, 8/9) cost the same, yet every concave non-decreasing U with
/// U(0) = 0, U(4/3) = 1 prefers Y.
inline CounterexampleReport counterexample_nonequiprobable(std::size_t random_utilities = 1000, std::uint64_t seed = 0)
{
    const RationalMarket m({Rational(3, 4), Rational(9, 8)}, {Rational(1, 3), Rational(2, 3)});
    const std::vector<Rational> xstar{Rational(0), Rational(4, 3)};
    const std::vector<Rational> y{Rational(4, 3), Rational(8, 9)};

    CounterexampleReport rep;
    rep.cost_xstar = m.cost(xstar);
    rep.cost_y = m.cost(y);
    // U(0) = 0 and U(4/3) = 1 fix E[U(X*)]
    rep.expected_utility_xstar = m.expectation({Rational(0), Rational(1)});
    // concavity between 0 and 4/3: U(8/9) >= (1 - t) U(0) + t U(4/3)
    const Rational t = y[1] / xstar[1];
    rep.u_at_8_9_bound = t;
    rep.expected_utility_y_bound = m.expectation({Rational(1), rep.u_at_8_9_bound});

    // random concave non-decreasing piecewise-linear utilities
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t r = 0; r < random_utilities; ++r) {
        const std::size_t pieces = 1 + static_cast<std::size_t>(unit(rng) * 6.0);
        std::vector<double> knots{0.0};
        for (std::size_t i = 1; i < pieces; ++i)
            knots.push_back(unit(rng) * 2.0);
        std::sort(knots.begin(), knots.end());
        std::vector<double> slopes(pieces);
        for (double& s : slopes)
            s = unit(rng);
        std::sort(slopes.begin(), slopes.end(), std::greater<>());
        slopes.front() += 1e-3; // keeps U(4/3) > 0
        auto raw = [&](double x) {
            double v = 0.0;
            for (std::size_t i = 0; i < pieces; ++i) {
                const double start = knots[i];
                const double end = i + 1 < pieces ? knots[i + 1] : std::numeric_limits<double>::infinity();
                if (x > start)
                    v += slopes[i] * (std::min(x, end) - start);
            }
            return v;
        };
        const double scale = raw(4.0 / 3.0);
        const double eu_y = (1.0 / 3.0) * raw(4.0 / 3.0) / scale + (2.0 / 3.0) * raw(8.0 / 9.0) / scale;
        rep.min_random_expected_utility_y = std::min(rep.min_random_expected_utility_y, eu_y);
    }
    rep.random_utilities = random_utilities;

    rep.holds = rep.cost_xstar == Rational(1) && rep.cost_y == Rational(1) && rep.expected_utility_xstar == Rational(2, 3)
        && rep.expected_utility_y_bound == Rational(7, 9) && rep.expected_utility_y_bound > rep.expected_utility_xstar
        && (random_utilities == 0 || rep.min_random_expected_utility_y >= 7.0 / 9.0 - 1e-12);
    return rep;
}

} // namespace utilityforge
