#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "utilityforge/error.hpp"

namespace utilityforge {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Tolerance {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    int max_iter = 60;

    void validate() const
    {
        if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_iter < 1)
            fail(ErrorCode::InvalidParameter, "tolerance requires abs_tol > 0, rel_tol > 0, max_iter >= 1");
    }
};

/// Strictly increasing sequence of at least two finite points.
class Grid {
public:
    explicit Grid(std::vector<double> points)
        : points_(std::move(points))
    {
        if (points_.size() < 2)
            fail(ErrorCode::InvalidParameter, "grid needs at least 2 points");
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (!std::isfinite(points_[i]))
                fail(ErrorCode::InvalidParameter, "grid points must be finite");
            if (i > 0 && !(points_[i - 1] < points_[i]))
                fail(ErrorCode::InvalidParameter, "grid points must be strictly increasing");
        }
    }

    static Grid uniform(double lo, double hi, std::size_t n)
    {
        if (n < 2)
            fail(ErrorCode::InvalidParameter, "grid needs at least 2 points");
        std::vector<double> pts(n);
        for (std::size_t i = 0; i < n; ++i)
            pts[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        pts.back() = hi;
        return Grid(std::move(pts));
    }

    [[nodiscard]] std::span<const double> points() const noexcept { return points_; }
    [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return points_[i]; }
    [[nodiscard]] double front() const noexcept { return points_.front(); }
    [[nodiscard]] double back() const noexcept { return points_.back(); }
    [[nodiscard]] auto begin() const noexcept { return points_.begin(); }
    [[nodiscard]] auto end() const noexcept { return points_.end(); }

private:
    std::vector<double> points_;
};

// ---------------------------------------------------------------------------
// Standard normal helpers
// ---------------------------------------------------------------------------

inline double normal_pdf(double z)
{
    constexpr double inv_sqrt_2pi = 0.39894228040143267793994605993438;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// 1 - Phi(z) without cancellation.
inline double normal_sf(double z)
{
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

inline double normal_quantile(double p)
{
    if (p <= 0.0)
        return -kInf;
    if (p >= 1.0)
        return kInf;
    if (p > 0.5)
        return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * (1.0 - p));
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// Phi^{-1}(1 - q), accurate for small q.
inline double normal_upper_quantile(double q)
{
    if (q <= 0.0)
        return kInf;
    if (q >= 1.0)
        return -kInf;
    if (q > 0.5)
        return normal_quantile(1.0 - q);
    return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod quadrature
// ---------------------------------------------------------------------------

namespace detail {

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double lo;
    double hi;
    double value;
    double error;
    int depth;
    bool operator<(const Segment& other) const noexcept { return error < other.error; }
};

// g is the integrand on the reference variable t in [0, 1] (already multiplied
// by the Jacobian). Nodes where the mapping degenerates return 0 from g.
template <class G>
Segment gauss_kronrod(const G& g, double lo, double hi, int depth)
{
    const double center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double fc = g(center);
    double kronrod = fc * kWgk[7];
    double gauss = fc * kWg[3];
    double abs_sum = std::abs(kronrod);
    std::array<double, 7> f1{}, f2{};
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[static_cast<std::size_t>(j)];
        f1[static_cast<std::size_t>(j)] = g(center - dx);
        f2[static_cast<std::size_t>(j)] = g(center + dx);
        const double pair = f1[static_cast<std::size_t>(j)] + f2[static_cast<std::size_t>(j)];
        kronrod += kWgk[static_cast<std::size_t>(j)] * pair;
        abs_sum += kWgk[static_cast<std::size_t>(j)]
            * (std::abs(f1[static_cast<std::size_t>(j)]) + std::abs(f2[static_cast<std::size_t>(j)]));
        if (j % 2 == 1)
            gauss += kWg[static_cast<std::size_t>(j / 2)] * pair;
    }
    const double mean = 0.5 * kronrod;
    double asc = kWgk[7] * std::abs(fc - mean);
    for (std::size_t j = 0; j < 7; ++j)
        asc += kWgk[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));

    const double value = kronrod * half;
    double err = std::abs((kronrod - gauss) * half);
    asc *= std::abs(half);
    abs_sum *= std::abs(half);
    if (asc != 0.0 && err != 0.0)
        err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (abs_sum > std::numeric_limits<double>::min() / (50.0 * eps))
        err = std::max(50.0 * eps * abs_sum, err);
    return {lo, hi, value, err, depth};
}

// Adaptive subdivision on [0, 1] in the reference variable.
template <class G>
double adaptive_unit(const G& g, const Tolerance& tol)
{
    constexpr std::size_t max_segments = 20000;
    std::priority_queue<Segment> queue;
    Segment whole = gauss_kronrod(g, 0.0, 1.0, 0);
    double total = whole.value;
    double total_err = whole.error;
    queue.push(whole);
    std::vector<Segment> frozen;
    double frozen_err = 0.0;

    while (total_err > std::max(tol.abs_tol, tol.rel_tol * std::abs(total))) {
        if (queue.empty() || queue.size() + frozen.size() >= max_segments) {
            fail(ErrorCode::NonConvergence,
                 "adaptive quadrature error estimate " + std::to_string(total_err) + " above target");
        }
        Segment worst = queue.top();
        queue.pop();
        if (worst.depth >= tol.max_iter) {
            frozen.push_back(worst);
            frozen_err += worst.error;
            if (frozen_err > std::max(tol.abs_tol, tol.rel_tol * std::abs(total)))
                fail(ErrorCode::NonConvergence, "quadrature refinement depth exhausted");
            continue;
        }
        const double mid = 0.5 * (worst.lo + worst.hi);
        Segment left = gauss_kronrod(g, worst.lo, mid, worst.depth + 1);
        Segment right = gauss_kronrod(g, mid, worst.hi, worst.depth + 1);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        queue.push(left);
        queue.push(right);
    }
    // Re-sum to drop accumulated cancellation from the running updates.
    double sum = 0.0;
    for (const auto& s : frozen)
        sum += s.value;
    while (!queue.empty()) {
        sum += queue.top().value;
        queue.pop();
    }
    return sum;
}

} // namespace detail

/// Integral of f over (lo, hi); either endpoint may be infinite.
///
/// The integrand is never evaluated at the endpoints. Finite endpoints are
/// smoothed with the cubic map s = 3t^2 - 2t^3, which absorbs integrable
/// power-law singularities of order up to 1/2 into a regular integrand; a
/// half-line is mapped through x = lo + s/(1-s).
template <class F>
double integrate(const F& f, double lo, double hi, const Tolerance& tol = {})
{
    tol.validate();
    if (std::isnan(lo) || std::isnan(hi))
        fail(ErrorCode::InvalidParameter, "integration bounds must not be NaN");
    if (lo == hi)
        return 0.0;
    if (lo > hi)
        return -integrate(f, hi, lo, tol);

    auto eval = [&f](double x) {
        const double y = f(x);
        if (!std::isfinite(y))
            fail(ErrorCode::NonFinite, "integrand is not finite at x = " + std::to_string(x));
        return y;
    };

    if (std::isinf(lo) && std::isinf(hi)) {
        return integrate(f, -kInf, 0.0, tol) + integrate(f, 0.0, kInf, tol);
    }
    if (std::isfinite(lo) && std::isfinite(hi)) {
        const double width = hi - lo;
        auto g = [&](double t) {
            const double s = t * t * (3.0 - 2.0 * t);
            const double x = lo + width * s;
            const double jac = 6.0 * t * (1.0 - t) * width;
            if (jac == 0.0 || !(x > lo) || !(x < hi))
                return 0.0;
            return eval(x) * jac;
        };
        return detail::adaptive_unit(g, tol);
    }
    const bool upper_infinite = std::isinf(hi);
    const double anchor = upper_infinite ? lo : hi;
    auto g = [&](double t) {
        const double s = t * t * (3.0 - 2.0 * t);
        const double one_minus = 1.0 - s;
        if (!(one_minus > 0.0) || s == 0.0)
            return 0.0;
        const double offset = s / one_minus;
        const double jac = 6.0 * t * (1.0 - t) / (one_minus * one_minus);
        const double x = upper_infinite ? anchor + offset : anchor - offset;
        if (!std::isfinite(x) || !std::isfinite(jac))
            return 0.0;
        return eval(x) * jac;
    };
    return detail::adaptive_unit(g, tol);
}

/// Sum of integrals over consecutive pieces of [lo, hi] split at the given
/// interior breakpoints (ignored when outside the open interval).
template <class F>
double integrate_pieces(const F& f, double lo, double hi, std::vector<double> breaks, const Tolerance& tol = {})
{
    if (lo > hi)
        return -integrate_pieces(f, hi, lo, std::move(breaks), tol);
    std::erase_if(breaks, [&](double b) { return !(b > lo && b < hi); });
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    double total = 0.0;
    double a = lo;
    for (double b : breaks) {
        total += integrate(f, a, b, tol);
        a = b;
    }
    return total + integrate(f, a, hi, tol);
}

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

/// Brent's method: inverse quadratic / secant steps with a bisection fallback.
/// The returned point always lies in the original bracket.
template <class F>
double find_root(const F& f, double lo, double hi, const Tolerance& tol = {})
{
    tol.validate();
    if (lo > hi)
        std::swap(lo, hi);
    double a = lo, b = hi;
    double fa = f(a), fb = f(b);
    if (!std::isfinite(fa) || !std::isfinite(fb))
        fail(ErrorCode::NonFinite, "root function not finite at bracket ends");
    if (fa == 0.0)
        return a;
    if (fb == 0.0)
        return b;
    if (fa * fb > 0.0)
        fail(ErrorCode::NoBracket, "f(lo) and f(hi) have the same sign");

    double c = a, fc = fa;
    double d = b - a, e = d;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const int max_steps = 4 * tol.max_iter + 100;
    for (int iter = 0; iter < max_steps; ++iter) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol1 = 2.0 * eps * std::abs(b) + 0.5 * std::min(tol.abs_tol, tol.rel_tol * std::max(1.0, std::abs(b)));
        const double m = 0.5 * (c - b);
        if (std::abs(m) <= tol1 || std::abs(fb) <= tol.abs_tol)
            return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            double p, q;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                const double qa = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0)
                q = -q;
            else
                p = -p;
            if (2.0 * p < std::min(3.0 * m * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol1) ? d : (m > 0.0 ? tol1 : -tol1);
        fb = f(b);
        if (!std::isfinite(fb))
            fail(ErrorCode::NonFinite, "root function not finite inside bracket");
    }
    return b;
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Second divided difference at interior point i of a (possibly non-uniform)
/// grid; on a uniform grid this is (f(x-h) - 2f(x) + f(x+h)) / h^2.
inline double second_divided_difference(double x0, double x1, double x2, double f0, double f1, double f2)
{
    const double left = (f1 - f0) / (x1 - x0);
    const double right = (f2 - f1) / (x2 - x1);
    return 2.0 * (right - left) / (x2 - x0);
}

template <class F>
double second_difference_min(const F& f, const Grid& grid)
{
    const auto pts = grid.points();
    if (pts.size() < 3)
        fail(ErrorCode::InvalidParameter, "second differences need at least 3 grid points");
    std::vector<double> vals(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        vals[i] = f(pts[i]);
        if (!std::isfinite(vals[i]))
            fail(ErrorCode::NonFinite, "function not finite on grid");
    }
    double best = kInf;
    for (std::size_t i = 1; i + 1 < pts.size(); ++i)
        best = std::min(best, second_divided_difference(pts[i - 1], pts[i], pts[i + 1], vals[i - 1], vals[i], vals[i + 1]));
    return best;
}

template <class F>
double central_difference(const F& f, double x, double h)
{
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

} // namespace utilityforge
