#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "utilityforge/distributions.hpp"
#include "utilityforge/efficiency.hpp"
#include "utilityforge/error.hpp"
#include "utilityforge/extended_real.hpp"
#include "utilityforge/market.hpp"
#include "utilityforge/numerics.hpp"

namespace utilityforge {

/// A concave, strictly increasing utility on an open interval (a, b).
/// Bounds may be IEEE infinities. `marginal` is the left derivative.
class CurveImpl {
public:
    virtual ~CurveImpl() = default;

    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual double lower() const = 0;
    [[nodiscard]] virtual double upper() const = 0;
    /// A point inside (a, b) used to start searches; value there is finite.
    [[nodiscard]] virtual double reference() const = 0;

    [[nodiscard]] virtual double value(double x) const = 0;
    [[nodiscard]] virtual double marginal(double x) const = 0;

    /// U'(a+) and U'(b-).
    [[nodiscard]] virtual double marginal_at_lower() const { return kInf; }
    [[nodiscard]] virtual double marginal_at_upper() const { return 0.0; }
    /// U(a+) and U(b-), possibly infinite.
    [[nodiscard]] virtual double value_at_lower() const = 0;
    [[nodiscard]] virtual double value_at_upper() const = 0;

    /// True when U' is continuous and strictly decreasing on (a, b).
    [[nodiscard]] virtual bool smooth_marginal() const { return true; }

    /// Levels y at which the pseudo-inverse of U' jumps (flats of U').
    [[nodiscard]] virtual std::vector<double> flat_marginal_levels() const { return {}; }

    /// inf{x in (a,b) : U'(x) <= y}, with inf of the empty set equal to b.
    [[nodiscard]] virtual double inverse_marginal(double y) const { return generic_inverse_marginal(y); }

protected:
    double generic_inverse_marginal(double y) const;
};

inline double CurveImpl::generic_inverse_marginal(double y) const
{
    if (std::isnan(y))
        fail(ErrorCode::NonFinite, "inverse marginal of NaN");
    const double a = lower();
    const double b = upper();
    if (y >= marginal_at_lower())
        return a;
    if (y < marginal_at_upper())
        return b;
    const double c = reference();
    auto below = [&](double x) { return marginal(x) <= y; };

    // bracket: marginal(lo) > y >= marginal(hi); finite ends are approached
    // geometrically, infinite ones by doubling steps
    double lo = c, hi = c;
    if (below(c)) {
        double d = std::isfinite(a) ? 0.5 * (c - a) : std::max(1.0, std::abs(c));
        for (int i = 0;; ++i) {
            const double cand = std::isfinite(a) ? a + d : c - d;
            if (!(cand > a) || !(cand < hi) || i > 2100)
                return a;
            if (!below(cand)) {
                lo = cand;
                break;
            }
            hi = cand;
            d = std::isfinite(a) ? 0.5 * d : 2.0 * d;
        }
    } else {
        double d = std::isfinite(b) ? 0.5 * (b - c) : std::max(1.0, std::abs(c));
        for (int i = 0;; ++i) {
            const double cand = std::isfinite(b) ? b - d : c + d;
            if (!(cand < b) || !(cand > lo) || i > 2100)
                return b;
            if (below(cand)) {
                hi = cand;
                break;
            }
            lo = cand;
            d = std::isfinite(b) ? 0.5 * d : 2.0 * d;
        }
    }

    if (smooth_marginal()) {
        const Tolerance t{1e-300, 1e-15, 100};
        return find_root([&](double x) { return marginal(x) - y; }, lo, hi, t);
    }
    for (int i = 0; i < 2000; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi))
            break;
        if (below(mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

/// Standard utility curve: value and marginal on (a, b) only.
class UtilityCurve {
public:
    explicit UtilityCurve(std::shared_ptr<const CurveImpl> impl)
        : impl_(std::move(impl))
    {
        if (!impl_)
            fail(ErrorCode::InvalidParameter, "null utility");
    }

    [[nodiscard]] std::string name() const { return impl_->name(); }
    [[nodiscard]] double lower() const { return impl_->lower(); }
    [[nodiscard]] double upper() const { return impl_->upper(); }
    [[nodiscard]] double anchor() const { return impl_->reference(); }
    [[nodiscard]] bool contains(double x) const { return x > lower() && x < upper(); }

    [[nodiscard]] double value(double x) const
    {
        require_inside(x);
        return impl_->value(x);
    }
    [[nodiscard]] double marginal(double x) const
    {
        require_inside(x);
        return impl_->marginal(x);
    }
    [[nodiscard]] double marginal_at_lower() const { return impl_->marginal_at_lower(); }
    [[nodiscard]] double marginal_at_upper() const { return impl_->marginal_at_upper(); }
    [[nodiscard]] double inverse_marginal(double y) const { return impl_->inverse_marginal(y); }

    [[nodiscard]] const CurveImpl& impl() const noexcept { return *impl_; }
    [[nodiscard]] std::shared_ptr<const CurveImpl> share() const noexcept { return impl_; }

private:
    void require_inside(double x) const
    {
        if (!contains(x))
            fail(ErrorCode::DomainMismatch, "x = " + std::to_string(x) + " outside the utility domain");
    }

    std::shared_ptr<const CurveImpl> impl_;
};

/// Utility extended to the whole line: -inf below a, flat at U(b-) from b on.
class GeneralizedUtility {
public:
    explicit GeneralizedUtility(UtilityCurve core)
        : core_(std::move(core))
    {}

    [[nodiscard]] const UtilityCurve& core() const noexcept { return core_; }
    [[nodiscard]] double lower() const { return core_.lower(); }
    [[nodiscard]] double upper() const { return core_.upper(); }

    [[nodiscard]] ExtendedReal value(double x) const
    {
        const CurveImpl& c = core_.impl();
        if (x < c.lower())
            return ExtendedReal::minus_infinity();
        if (x == c.lower())
            return ExtendedReal::from_double(c.value_at_lower());
        if (x >= c.upper())
            return ExtendedReal::from_double(c.value_at_upper());
        return ExtendedReal(c.value(x));
    }

    /// Left derivative with +inf below a and 0 above b; at a and b the
    /// one-sided limits from inside the domain.
    [[nodiscard]] ExtendedReal marginal(double x) const
    {
        const CurveImpl& c = core_.impl();
        if (x < c.lower())
            return ExtendedReal::plus_infinity();
        if (x == c.lower())
            return ExtendedReal::from_double(c.marginal_at_lower());
        if (x > c.upper())
            return ExtendedReal(0.0);
        if (x == c.upper())
            return ExtendedReal::from_double(c.marginal_at_upper());
        return ExtendedReal(c.marginal(x));
    }

    [[nodiscard]] double inverse_marginal(double y) const { return core_.inverse_marginal(y); }

private:
    UtilityCurve core_;
};

// ---------------------------------------------------------------------------
// Parametric families
// ---------------------------------------------------------------------------

namespace curves {

/// scale * x^{1-rho} / (1-rho), log when rho = 1.
class Crra final : public CurveImpl {
public:
    Crra(double rho, double scale)
        : rho_(rho), scale_(scale)
    {}
    std::string name() const override { return "crra"; }
    double lower() const override { return 0.0; }
    double upper() const override { return kInf; }
    double reference() const override { return 1.0; }
    double value(double x) const override
    {
        if (rho_ == 1.0)
            return scale_ * std::log(x);
        return scale_ * std::pow(x, 1.0 - rho_) / (1.0 - rho_);
    }
    double marginal(double x) const override { return scale_ * std::pow(x, -rho_); }
    double value_at_lower() const override { return rho_ < 1.0 ? 0.0 : -kInf; }
    double value_at_upper() const override { return rho_ > 1.0 ? 0.0 : kInf; }
    double inverse_marginal(double y) const override
    {
        if (!(y > 0.0))
            return kInf;
        return std::pow(y / scale_, -1.0 / rho_);
    }

private:
    double rho_, scale_;
};

/// -exp(-gamma x) / gamma.
class Cara final : public CurveImpl {
public:
    explicit Cara(double gamma)
        : gamma_(gamma)
    {}
    std::string name() const override { return "cara"; }
    double lower() const override { return -kInf; }
    double upper() const override { return kInf; }
    double reference() const override { return 0.0; }
    double value(double x) const override { return -std::exp(-gamma_ * x) / gamma_; }
    double marginal(double x) const override { return std::exp(-gamma_ * x); }
    double value_at_lower() const override { return -kInf; }
    double value_at_upper() const override { return 0.0; }
    double inverse_marginal(double y) const override
    {
        if (!(y > 0.0))
            return kInf;
        return -std::log(y) / gamma_;
    }

private:
    double gamma_;
};

/// (1-g)/g * (a x/(1-g) + b)^g; log(a x + b) at g = 0.
class Hara final : public CurveImpl {
public:
    Hara(double a, double b, double g)
        : a_(a), b_(b), g_(g)
    {}
    std::string name() const override { return "hara"; }
    // base(x) = a x/(1-g) + b vanishes at x0 = -b(1-g)/a
    double edge() const { return -b_ * (1.0 - g_) / a_; }
    double lower() const override { return g_ < 1.0 ? edge() : -kInf; }
    double upper() const override { return g_ < 1.0 ? kInf : edge(); }
    double reference() const override { return g_ < 1.0 ? edge() + 1.0 : edge() - 1.0; }
    double base(double x) const { return a_ * x / (1.0 - g_) + b_; }
    double value(double x) const override
    {
        if (g_ == 0.0)
            return std::log(base(x));
        return (1.0 - g_) / g_ * std::pow(base(x), g_);
    }
    double marginal(double x) const override { return a_ * std::pow(base(x), g_ - 1.0); }
    double value_at_lower() const override
    {
        if (g_ > 1.0 || g_ <= 0.0)
            return -kInf;
        return 0.0;
    }
    double value_at_upper() const override
    {
        if (g_ > 1.0 || g_ < 0.0)
            return 0.0;
        return kInf;
    }
    double inverse_marginal(double y) const override
    {
        if (!(y > 0.0))
            return upper();
        const double base = std::pow(y / a_, 1.0 / (g_ - 1.0));
        return (base - b_) * (1.0 - g_) / a_;
    }

private:
    double a_, b_, g_;
};

/// Yaari optimum: c (x - c) on (0, B); -inf below 0, c (B - c) from B on.
class YaariPiecewise final : public CurveImpl {
public:
    YaariPiecewise(double c, double B)
        : c_(c), B_(B)
    {}
    std::string name() const override { return "yaari-piecewise"; }
    double lower() const override { return 0.0; }
    double upper() const override { return B_; }
    double reference() const override { return 0.5 * B_; }
    double value(double x) const override { return c_ * (x - c_); }
    double marginal(double) const override { return c_; }
    double marginal_at_lower() const override { return c_; }
    double marginal_at_upper() const override { return c_; }
    double value_at_lower() const override { return -c_ * c_; }
    double value_at_upper() const override { return c_ * (B_ - c_); }
    bool smooth_marginal() const override { return false; }
    std::vector<double> flat_marginal_levels() const override { return {c_}; }
    double inverse_marginal(double y) const override { return y >= c_ ? 0.0 : B_; }

private:
    double c_, B_;
};

/// CRRA above a floor G with U(G) = 0: scale (x^{1-rho} - G^{1-rho})/(1-rho).
class GuaranteeCrra final : public CurveImpl {
public:
    GuaranteeCrra(double G, double rho, double scale)
        : G_(G), rho_(rho), scale_(scale)
    {}
    std::string name() const override { return "guarantee-crra"; }
    double lower() const override { return G_; }
    double upper() const override { return kInf; }
    double reference() const override { return 2.0 * G_; }
    double value(double x) const override
    {
        if (rho_ == 1.0)
            return scale_ * std::log(x / G_);
        return scale_ * (std::pow(x, 1.0 - rho_) - std::pow(G_, 1.0 - rho_)) / (1.0 - rho_);
    }
    double marginal(double x) const override { return scale_ * std::pow(x, -rho_); }
    double marginal_at_lower() const override { return marginal(G_); }
    double value_at_lower() const override { return 0.0; }
    double value_at_upper() const override
    {
        return rho_ > 1.0 ? -scale_ * std::pow(G_, 1.0 - rho_) / (1.0 - rho_) : kInf;
    }
    double inverse_marginal(double y) const override
    {
        if (y >= marginal(G_))
            return G_;
        return std::pow(y / scale_, -1.0 / rho_);
    }

private:
    double G_, rho_, scale_;
};

} // namespace curves

struct CrraFamily { double rho; double scale = 1.0; };
struct CaraFamily { double gamma; };
struct HaraFamily { double a; double b; double gamma; };
struct LogFamily {};
struct YaariFamily { double c; double B; };
struct GuaranteeCrraFamily { double G; double rho; double scale = 1.0; };

using ParametricFamily = std::variant<CrraFamily, CaraFamily, HaraFamily, LogFamily, YaariFamily, GuaranteeCrraFamily>;

inline std::string family_name(const ParametricFamily& fam)
{
    return std::visit(
        [](const auto& f) -> std::string {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, CrraFamily>) return "crra";
            else if constexpr (std::is_same_v<T, CaraFamily>) return "cara";
            else if constexpr (std::is_same_v<T, HaraFamily>) return "hara";
            else if constexpr (std::is_same_v<T, LogFamily>) return "log";
            else if constexpr (std::is_same_v<T, YaariFamily>) return "yaari-piecewise";
            else return "guarantee-crra";
        },
        fam);
}

namespace detail {

inline void require_param(bool ok, const std::string& what)
{
    if (!ok)
        fail(ErrorCode::InvalidParameter, what);
}

inline std::shared_ptr<const CurveImpl> build_curve(const CrraFamily& f)
{
    require_param(f.rho > 0.0 && std::isfinite(f.rho), "crra needs rho > 0");
    require_param(f.scale > 0.0 && std::isfinite(f.scale), "crra needs scale > 0");
    return std::make_shared<curves::Crra>(f.rho, f.scale);
}
inline std::shared_ptr<const CurveImpl> build_curve(const CaraFamily& f)
{
    require_param(f.gamma > 0.0 && std::isfinite(f.gamma), "cara needs gamma > 0");
    return std::make_shared<curves::Cara>(f.gamma);
}
inline std::shared_ptr<const CurveImpl> build_curve(const HaraFamily& f)
{
    require_param(f.a > 0.0 && std::isfinite(f.a), "hara needs a > 0");
    require_param(std::isfinite(f.b) && std::isfinite(f.gamma), "hara parameters must be finite");
    require_param(f.gamma != 1.0, "hara needs gamma != 1");
    require_param(f.gamma < 1.0 || f.b > 0.0, "hara with gamma > 1 needs b > 0");
    return std::make_shared<curves::Hara>(f.a, f.b, f.gamma);
}
inline std::shared_ptr<const CurveImpl> build_curve(const LogFamily&)
{
    return std::make_shared<curves::Crra>(1.0, 1.0);
}
inline std::shared_ptr<const CurveImpl> build_curve(const YaariFamily& f)
{
    require_param(f.c > 0.0 && std::isfinite(f.c), "yaari needs c > 0");
    require_param(f.B > 0.0 && std::isfinite(f.B), "yaari needs B > 0");
    return std::make_shared<curves::YaariPiecewise>(f.c, f.B);
}
inline std::shared_ptr<const CurveImpl> build_curve(const GuaranteeCrraFamily& f)
{
    require_param(f.G > 0.0 && std::isfinite(f.G), "guarantee needs G > 0");
    require_param(f.rho > 0.0 && std::isfinite(f.rho), "guarantee needs exponent > 0");
    require_param(f.scale > 0.0 && std::isfinite(f.scale), "guarantee needs scale > 0");
    return std::make_shared<curves::GuaranteeCrra>(f.G, f.rho, f.scale);
}

} // namespace detail

inline UtilityCurve make_utility(const ParametricFamily& fam)
{
    return UtilityCurve(std::visit([](const auto& f) { return detail::build_curve(f); }, fam));
}

inline GeneralizedUtility make_generalized(const ParametricFamily& fam)
{
    return GeneralizedUtility(make_utility(fam));
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

namespace curves {

/// U(x) = int_c^x F_xi^{-1}(1 - F(y-)) dy.
class Inferred final : public CurveImpl {
public:
    Inferred(Distribution F, PricingKernel k, double c, Tolerance tol)
        : F_(std::move(F)), k_(std::move(k)), c_(c), tol_(tol)
    {
        const Support s = F_.support();
        a_ = s.lo;
        b_ = s.hi;
        atoms_ = F_.atoms();
        for (const Atom& at : atoms_)
            breaks_.push_back(at.location);
        if (F_.kind() == LawKind::discrete) {
            for (std::size_t i = 0; i + 1 < atoms_.size(); ++i) {
                const double p = F_.cdf(atoms_[i].location);
                flats_.push_back(kernel_upper_quantile(k_, p, F_.sf(atoms_[i].location)));
            }
        }
        // a search point strictly inside (a, b)
        ref_ = c_;
        if (!(ref_ > a_ && ref_ < b_)) {
            if (std::isfinite(a_) && std::isfinite(b_))
                ref_ = 0.5 * (a_ + b_);
            else if (std::isfinite(a_))
                ref_ = a_ + 1.0;
            else
                ref_ = b_ - 1.0;
        }
    }

    std::string name() const override { return "inferred(" + F_.name() + ")"; }
    double lower() const override { return a_; }
    double upper() const override { return b_; }
    double reference() const override { return ref_; }
    double anchor() const { return c_; }

    double marginal(double x) const override
    {
        double mass = 0.0;
        for (const Atom& at : atoms_)
            if (at.location == x)
                mass += at.mass;
        const double p = std::max(0.0, F_.cdf(x) - mass);
        return kernel_upper_quantile(k_, p, std::min(1.0, F_.sf(x) + mass));
    }

    double marginal_at_lower() const override
    {
        if (!std::isfinite(a_))
            return kInf;
        return kernel_upper_quantile(k_, F_.cdf(a_), F_.sf(a_));
    }

    double marginal_at_upper() const override
    {
        if (!std::isfinite(b_))
            return 0.0;
        const double mass = F_.atom_mass(b_);
        return kernel_upper_quantile(k_, std::max(0.0, F_.cdf(b_) - mass), std::min(1.0, F_.sf(b_) + mass));
    }

    double value(double x) const override { return integral(c_, x); }

    double value_at_lower() const override
    {
        if (!std::isfinite(a_))
            return -kInf;
        if (std::isinf(marginal_at_lower())) {
            try {
                return integral(c_, a_);
            } catch (const Error&) {
                return -kInf;
            }
        }
        return integral(c_, a_);
    }

    double value_at_upper() const override
    {
        try {
            return integral(c_, b_);
        } catch (const Error&) {
            return kInf;
        }
    }

    bool smooth_marginal() const override { return atoms_.empty() && !F_.has_flats(); }
    std::vector<double> flat_marginal_levels() const override { return flats_; }

private:
    double integral(double from, double to) const
    {
        auto m = [this](double y) { return marginal(y); };
        return integrate_pieces(m, from, to, breaks_, tol_);
    }

    Distribution F_;
    PricingKernel k_;
    double c_;
    Tolerance tol_;
    double a_ = 0.0, b_ = 0.0, ref_ = 0.0;
    std::vector<Atom> atoms_;
    std::vector<double> breaks_;
    std::vector<double> flats_;
};

} // namespace curves

/// Tolerance used for cumulative value quadrature of inferred curves.
inline constexpr Tolerance kCurveTolerance{1e-12, 1e-11, 60};

namespace detail {

inline double default_anchor(const Distribution& F) { return F.impl().quantile(0.5); }

inline void check_anchor(const Distribution& F, double c)
{
    if (!std::isfinite(c))
        fail(ErrorCode::InvalidParameter, "anchor must be finite");
    if (!(F.cdf(c) > 0.0))
        fail(ErrorCode::InvalidParameter, "anchor needs F(c) > 0");
    if (c < F.lower_bound())
        fail(ErrorCode::InvalidParameter, "anchor lies below the support");
}

} // namespace detail

/// Utility whose optimal payoff has law F (continuous, strictly increasing F).
inline UtilityCurve infer_utility(const Distribution& F, const PricingKernel& k, std::optional<double> anchor = std::nullopt,
                                  const Tolerance& tol = kCurveTolerance)
{
    if (!F.atoms().empty())
        fail(ErrorCode::NonContinuousTarget, "target law has atoms; use infer_generalized_utility");
    if (F.has_flats())
        fail(ErrorCode::NonContinuousTarget, "target cdf has flats; use infer_generalized_utility");
    const double c = anchor.value_or(detail::default_anchor(F));
    detail::check_anchor(F, c);
    return UtilityCurve(std::make_shared<curves::Inferred>(F, k, c, tol));
}

/// Generalized utility for an arbitrary target law (atoms and flats allowed).
inline GeneralizedUtility infer_generalized_utility(const Distribution& F, const PricingKernel& k,
                                                    std::optional<double> anchor = std::nullopt,
                                                    const Tolerance& tol = kCurveTolerance)
{
    const double c = anchor.value_or(detail::default_anchor(F));
    detail::check_anchor(F, c);
    return GeneralizedUtility(UtilityCurve(std::make_shared<curves::Inferred>(F, k, c, tol)));
}

// ---------------------------------------------------------------------------
// Utility -> optimal payoff
// ---------------------------------------------------------------------------

struct OptimalPayoff {
    Payoff payoff;
    double lambda;
    double cost;
};

namespace detail {

inline Payoff payoff_for_lambda(std::shared_ptr<const CurveImpl> u, const PricingKernel& k, double lambda)
{
    std::vector<double> breaks;
    for (double level : u->flat_marginal_levels()) {
        const double u_break = k.law().cdf(level / lambda);
        if (u_break > 0.0 && u_break < 1.0)
            breaks.push_back(u_break);
    }
    auto fn = [u, lambda](const KernelState& s) { return u->inverse_marginal(lambda * s.xi); };
    return Payoff(std::move(fn), std::nullopt, std::move(breaks));
}

} // namespace detail

/// Payoff xi -> [U']^{-1}(lambda* xi) whose price matches the budget.
inline OptimalPayoff optimal_payoff(const UtilityCurve& u, const PricingKernel& k, double budget, const Tolerance& tol = {})
{
    if (!std::isfinite(budget))
        fail(ErrorCode::BudgetOutOfRange, "budget must be finite");
    const double mean = k.mean();
    const double lo_budget = std::isfinite(u.lower()) ? mean * u.lower() : -kInf;
    const double hi_budget = std::isfinite(u.upper()) ? mean * u.upper() : kInf;
    if (!(budget > lo_budget && budget < hi_budget))
        fail(ErrorCode::BudgetOutOfRange, "budget " + std::to_string(budget) + " outside (" + std::to_string(lo_budget) + ", "
                                              + std::to_string(hi_budget) + ")");

    const auto impl = u.share();
    const Tolerance cost_tol{std::min(tol.abs_tol, 1e-12), std::min(tol.rel_tol, 1e-10), tol.max_iter};
    auto excess = [&](double t) {
        const Payoff x = detail::payoff_for_lambda(impl, k, std::exp(t));
        return cost(x, k, cost_tol) - budget;
    };

    // cost is non-increasing in lambda; expand geometrically from lambda = 1
    const double t_max = std::log(1e12);
    double t_lo = 0.0, t_hi = 0.0;
    double f0 = excess(0.0);
    if (f0 == 0.0)
        return {detail::payoff_for_lambda(impl, k, 1.0), 1.0, budget};
    if (f0 > 0.0) {
        double step = 1.0;
        double f = f0;
        while (f > 0.0) {
            t_lo = t_hi;
            t_hi = std::min(t_hi + step, t_max);
            f = excess(t_hi);
            if (f > 0.0 && t_hi >= t_max)
                fail(ErrorCode::NoBracket, "budget not reached for lambda up to 1e12");
            step *= 2.0;
        }
    } else {
        double step = 1.0;
        double f = f0;
        while (f < 0.0) {
            t_hi = t_lo;
            t_lo = std::max(t_lo - step, -t_max);
            f = excess(t_lo);
            if (f < 0.0 && t_lo <= -t_max)
                fail(ErrorCode::NoBracket, "budget not reached for lambda down to 1e-12");
            step *= 2.0;
        }
    }
    const double abs_tol = std::max(1e-13, 1e-3 * tol.abs_tol);
    const double t_star = find_root(excess, t_lo, t_hi, Tolerance{abs_tol, 1e-14, 100});
    const double lambda = std::exp(t_star);
    Payoff x = detail::payoff_for_lambda(impl, k, lambda);
    const double c = cost(x, k, cost_tol);
    return {std::move(x), lambda, c};
}

inline OptimalPayoff optimal_payoff(const GeneralizedUtility& u, const PricingKernel& k, double budget, const Tolerance& tol = {})
{
    return optimal_payoff(u.core(), k, budget, tol);
}

// ---------------------------------------------------------------------------
// Affine comparison
// ---------------------------------------------------------------------------

struct AffineFit {
    double alpha;
    double beta;
    double residual;
};

/// Least-squares alpha * fam + beta against u on the grid.
inline AffineFit affine_fit(const UtilityCurve& u, const ParametricFamily& fam, const Grid& grid)
{
    const UtilityCurve f = make_utility(fam);
    std::vector<double> us, fs;
    for (double x : grid) {
        if (!u.contains(x) || !f.contains(x))
            fail(ErrorCode::DomainMismatch, "grid point " + std::to_string(x) + " outside a utility domain");
        us.push_back(u.value(x));
        fs.push_back(f.value(x));
    }
    const double n = static_cast<double>(us.size());
    double fm = 0.0, um = 0.0;
    for (std::size_t i = 0; i < us.size(); ++i) {
        fm += fs[i];
        um += us[i];
    }
    fm /= n;
    um /= n;
    double sff = 0.0, sfu = 0.0;
    for (std::size_t i = 0; i < us.size(); ++i) {
        sff += (fs[i] - fm) * (fs[i] - fm);
        sfu += (fs[i] - fm) * (us[i] - um);
    }
    if (!(sff > 0.0))
        fail(ErrorCode::DomainMismatch, "family is constant on the grid");
    const double alpha = sfu / sff;
    const double beta = um - alpha * fm;
    double worst = 0.0;
    for (std::size_t i = 0; i < us.size(); ++i)
        worst = std::max(worst, std::abs(us[i] - (alpha * fs[i] + beta)));
    return {alpha, beta, worst};
}

/// Max residual of the best affine map of the family onto u.
inline double affine_match(const UtilityCurve& u, const ParametricFamily& fam, const Grid& grid)
{
    return affine_fit(u, fam, grid).residual;
}

// ---------------------------------------------------------------------------
// Yaari fixture
// ---------------------------------------------------------------------------

struct YaariSetup {
    double c;
    double B;
    double F0; ///< P(X = 0)
    Distribution law;
};

/// Two-point optimum B * 1{xi <= c} for kernel level c, with B set so the
/// payoff costs X0 (price of 1{xi <= c} computed by quadrature).
inline YaariSetup yaari_setup(const PricingKernel& k, double c, double X0, const Tolerance& tol = kCurveTolerance)
{
    if (!(c > 0.0) || !std::isfinite(c))
        fail(ErrorCode::InvalidParameter, "yaari level c must be positive");
    if (!(X0 > 0.0) || !std::isfinite(X0))
        fail(ErrorCode::InvalidParameter, "yaari budget must be positive");
    const double u_c = k.law().cdf(c);
    const Payoff digital([c](const KernelState& s) { return s.xi <= c ? 1.0 : 0.0; }, std::nullopt, {u_c});
    const double unit_price = cost(digital, k, tol);
    const double B = X0 / unit_price;
    const double F0 = k.law().sf(c);
    return {c, B, F0, two_point(0.0, B, F0)};
}

} // namespace utilityforge
