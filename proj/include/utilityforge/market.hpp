#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>

#include "utilityforge/distributions.hpp"
#include "utilityforge/error.hpp"
#include "utilityforge/extended_real.hpp"
#include "utilityforge/numerics.hpp"

namespace utilityforge {

/// Black-Scholes market parameters; rates per year, horizon in years.
struct BsParams {
    double mu = 0.0;
    double sigma = 0.0;
    double r = 0.0;
    double T = 0.0;
    double S0 = 1.0;

    [[nodiscard]] double theta() const noexcept { return (mu - r) / sigma; }

    void validate() const
    {
        if (!(sigma > 0.0) || !std::isfinite(sigma))
            fail(ErrorCode::InvalidParameter, "sigma must be positive");
        if (!(T > 0.0) || !std::isfinite(T))
            fail(ErrorCode::InvalidParameter, "T must be positive");
        if (!(S0 > 0.0) || !std::isfinite(S0))
            fail(ErrorCode::InvalidParameter, "S0 must be positive");
        if (!std::isfinite(mu) || !std::isfinite(r) || !std::isfinite(theta()))
            fail(ErrorCode::InvalidParameter, "mu, r and theta must be finite");
    }
};

/// A point of the kernel's quantile space: u = F_xi(xi), q = 1 - u, both kept
/// so tails on either side are resolved without cancellation.
struct KernelState {
    double u;
    double q;
    double xi;
};

namespace laws {

/// Law of H = -log(xi) for a continuous positive kernel law.
class NegLog final : public LawImpl {
public:
    explicit NegLog(Distribution base)
        : base_(std::move(base))
    {}
    std::string name() const override { return "neglog(" + base_.name() + ")"; }
    Support support() const override { return {-kInf, kInf}; }
    double cdf(double y) const override { return base_.sf(std::exp(-y)); }
    double sf(double y) const override { return base_.cdf(std::exp(-y)); }
    double quantile(double p) const override { return -std::log(base_.upper_quantile(p)); }
    double upper_quantile(double q) const override { return -std::log(base_.quantile(q)); }
    std::optional<double> density(double y) const override
    {
        const double x = std::exp(-y);
        const auto f = base_.density(x);
        if (!f)
            return std::nullopt;
        return *f * x;
    }

private:
    Distribution base_;
};

} // namespace laws

class PricingKernel {
public:
    PricingKernel(Distribution law, Distribution h_law, std::optional<BsParams> bs)
        : law_(std::move(law)), h_law_(std::move(h_law)), bs_(bs)
    {}

    /// Law of xi_T.
    [[nodiscard]] const Distribution& law() const noexcept { return law_; }
    /// Law of H_T = -log(xi_T).
    [[nodiscard]] const Distribution& h_law() const noexcept { return h_law_; }
    [[nodiscard]] const std::optional<BsParams>& bs() const noexcept { return bs_; }

    /// xi_T as a function of S_T (Black-Scholes kernels only).
    [[nodiscard]] double from_stock(double s) const
    {
        const BsParams& p = require_bs();
        return alpha() * std::pow(s / p.S0, -beta());
    }

    /// Inverse of from_stock.
    [[nodiscard]] double stock_from_kernel(double xi) const
    {
        const BsParams& p = require_bs();
        return p.S0 * std::pow(xi / alpha(), -1.0 / beta());
    }

    [[nodiscard]] double alpha() const
    {
        const BsParams& p = require_bs();
        const double th = p.theta();
        return std::exp(th / p.sigma * (p.mu - 0.5 * p.sigma * p.sigma) * p.T - (p.r + 0.5 * th * th) * p.T);
    }

    [[nodiscard]] double beta() const { return require_bs().theta() / require_bs().sigma; }

    /// E[xi_T]; e^{-rT} for Black-Scholes, otherwise by quadrature.
    [[nodiscard]] double mean() const
    {
        if (bs_)
            return std::exp(-bs_->r * bs_->T);
        return integrate([this](double u) { return at(u).xi; }, 0.0, 0.5)
            + integrate([this](double q) { return at_upper(q).xi; }, 0.0, 0.5);
    }

    /// State at kernel quantile level u in (0,1).
    [[nodiscard]] KernelState at(double u) const
    {
        if (u > 0.5)
            return at_upper(1.0 - u);
        return {u, 1.0 - u, law_.impl().quantile(u)};
    }

    /// State at u = 1 - q, for q in (0,1).
    [[nodiscard]] KernelState at_upper(double q) const
    {
        if (q > 0.5)
            return at(1.0 - q);
        return {1.0 - q, q, law_.impl().upper_quantile(q)};
    }

    /// State of a given kernel value xi > 0.
    [[nodiscard]] KernelState at_value(double xi) const
    {
        const double u = law_.cdf(xi);
        const double q = law_.sf(xi);
        return {u, q, xi};
    }

private:
    const BsParams& require_bs() const
    {
        if (!bs_)
            fail(ErrorCode::InvalidParameter, "operation needs a Black-Scholes kernel");
        return *bs_;
    }

    Distribution law_;
    Distribution h_law_;
    std::optional<BsParams> bs_;
};

/// Black-Scholes kernel: xi_T ~ LN(-rT - theta^2 T/2, theta^2 T).
inline PricingKernel bs_kernel(const BsParams& p)
{
    p.validate();
    const double th = p.theta();
    if (th == 0.0)
        fail(ErrorCode::DegenerateKernel, "theta = 0 gives a constant kernel");
    const double s = std::abs(th) * std::sqrt(p.T);
    const double m = -p.r * p.T - 0.5 * th * th * p.T;
    return PricingKernel(lognormal(m, s), normal(-m, s), p);
}

/// Kernel with an arbitrary continuous law on (0, inf).
inline PricingKernel custom_kernel(const Distribution& law)
{
    if (law.kind() != LawKind::continuous || !law.atoms().empty())
        fail(ErrorCode::InvalidParameter, "kernel law must be continuous");
    const Support s = law.support();
    if (s.lo != 0.0 || !std::isinf(s.hi))
        fail(ErrorCode::InvalidParameter, "kernel law must be supported on (0, inf)");
    return PricingKernel(law, Distribution(std::make_shared<laws::NegLog>(law)), std::nullopt);
}

/// F_xi^{-1}(p) with F_xi^{-1}(0) = 0 and F_xi^{-1}(1) = +inf.
inline ExtendedReal kernel_quantile(const PricingKernel& k, double p)
{
    if (!(p >= 0.0 && p <= 1.0))
        fail(ErrorCode::InvalidParameter, "kernel quantile argument must lie in [0,1]");
    if (p == 0.0)
        return ExtendedReal(0.0);
    if (p == 1.0)
        return ExtendedReal::plus_infinity();
    return ExtendedReal(k.at(p).xi);
}

/// F_xi^{-1}(1 - p) evaluated from (p, 1 - p) without cancellation; the
/// integrand of the implied-utility formula. Returns IEEE infinity at p = 0.
inline double kernel_upper_quantile(const PricingKernel& k, double p, double one_minus_p)
{
    if (p <= 0.0)
        return kInf;
    if (one_minus_p <= 0.0)
        return 0.0;
    if (p <= 0.5)
        return k.at_upper(p).xi;
    return k.at(one_minus_p).xi;
}

} // namespace utilityforge
