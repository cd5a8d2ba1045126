#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "utilityforge/error.hpp"
#include "utilityforge/numerics.hpp"

namespace utilityforge {

enum class LawKind { continuous, discrete, mixed };

inline constexpr std::string_view to_string(LawKind kind) noexcept
{
    switch (kind) {
    case LawKind::continuous: return "continuous";
    case LawKind::discrete: return "discrete";
    case LawKind::mixed: return "mixed";
    }
    return "unknown";
}

struct Atom {
    double location;
    double mass;
};

/// Closure of the support, endpoints possibly infinite.
struct Support {
    double lo;
    double hi;
};

/// Interface for a scalar law. Implementations only need cdf, support and
/// name; the remaining members have generic fallbacks.
class LawImpl {
public:
    virtual ~LawImpl() = default;

    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual LawKind kind() const { return LawKind::continuous; }
    [[nodiscard]] virtual Support support() const = 0;
    [[nodiscard]] virtual double cdf(double x) const = 0;
    [[nodiscard]] virtual double sf(double x) const { return 1.0 - cdf(x); }
    [[nodiscard]] virtual std::optional<double> density(double) const { return std::nullopt; }
    [[nodiscard]] virtual std::vector<Atom> atoms() const { return {}; }
    [[nodiscard]] virtual bool has_flats() const { return false; }

    /// inf{t : F(t) >= p} for p in (0,1).
    [[nodiscard]] virtual double quantile(double p) const { return generic_quantile(p); }

    /// quantile(1 - q), overridden where the upper tail can be done without
    /// cancellation.
    [[nodiscard]] virtual double upper_quantile(double q) const { return quantile(1.0 - q); }

    [[nodiscard]] virtual std::optional<double> density_derivative(double x) const
    {
        const auto f0 = density(x);
        if (!f0)
            return std::nullopt;
        const double h = 1e-5 * std::max(1.0, std::abs(x));
        const auto fp = density(x + h);
        const auto fm = density(x - h);
        if (!fp || !fm)
            return std::nullopt;
        return (*fp - *fm) / (2.0 * h);
    }

protected:
    [[nodiscard]] double generic_quantile(double p) const
    {
        for (const Atom& a : atoms()) {
            const double upper = cdf(a.location);
            if (upper - a.mass < p && p <= upper)
                return a.location;
        }
        const Support s = support();
        double lo = s.lo;
        double hi = s.hi;
        if (std::isfinite(lo) && cdf(lo) >= p)
            return lo;
        if (!std::isfinite(lo)) {
            double step = 1.0;
            lo = std::isfinite(hi) ? hi - step : -step;
            while (cdf(lo) >= p) {
                step *= 2.0;
                lo -= step;
                if (!std::isfinite(lo))
                    fail(ErrorCode::NonConvergence, "quantile bracket expansion failed");
            }
        }
        if (!std::isfinite(hi)) {
            double step = 1.0;
            hi = std::max(lo, 0.0) + step;
            while (cdf(hi) < p) {
                step *= 2.0;
                hi += step;
                if (!std::isfinite(hi))
                    fail(ErrorCode::NonConvergence, "quantile bracket expansion failed");
            }
        }
        // invariant: cdf(lo) < p <= cdf(hi)
        for (int i = 0; i < 2000; ++i) {
            const double mid = lo + 0.5 * (hi - lo);
            if (mid <= lo || mid >= hi)
                break;
            if (cdf(mid) >= p)
                hi = mid;
            else
                lo = mid;
        }
        return hi;
    }
};

/// Immutable, cheaply copyable handle on a scalar law.
class Distribution {
public:
    explicit Distribution(std::shared_ptr<const LawImpl> impl)
        : impl_(std::move(impl))
    {
        if (!impl_)
            fail(ErrorCode::InvalidParameter, "null law");
    }

    [[nodiscard]] std::string name() const { return impl_->name(); }
    [[nodiscard]] LawKind kind() const { return impl_->kind(); }
    [[nodiscard]] Support support() const { return impl_->support(); }
    [[nodiscard]] double cdf(double x) const { return impl_->cdf(x); }
    [[nodiscard]] double sf(double x) const { return impl_->sf(x); }
    [[nodiscard]] std::optional<double> density(double x) const { return impl_->density(x); }
    [[nodiscard]] std::optional<double> density_derivative(double x) const { return impl_->density_derivative(x); }
    [[nodiscard]] std::vector<Atom> atoms() const { return impl_->atoms(); }
    [[nodiscard]] bool has_flats() const { return impl_->has_flats(); }

    [[nodiscard]] double quantile(double p) const
    {
        if (!(p > 0.0 && p < 1.0))
            fail(ErrorCode::InvalidParameter, "quantile argument must lie in (0,1)");
        return impl_->quantile(p);
    }

    /// quantile(1 - q) for q in (0,1).
    [[nodiscard]] double upper_quantile(double q) const
    {
        if (!(q > 0.0 && q < 1.0))
            fail(ErrorCode::InvalidParameter, "upper quantile argument must lie in (0,1)");
        return impl_->upper_quantile(q);
    }

    /// F(x-), the left limit of the cdf.
    [[nodiscard]] double cdf_left(double x) const
    {
        double mass = 0.0;
        for (const Atom& a : impl_->atoms())
            if (a.location == x)
                mass += a.mass;
        return std::max(0.0, impl_->cdf(x) - mass);
    }

    [[nodiscard]] double atom_mass(double x) const
    {
        double mass = 0.0;
        for (const Atom& a : impl_->atoms())
            if (a.location == x)
                mass += a.mass;
        return mass;
    }

    /// sup{x : F(x) = 0} and inf{x : F(x) = 1}.
    [[nodiscard]] double lower_bound() const { return impl_->support().lo; }
    [[nodiscard]] double upper_bound() const { return impl_->support().hi; }

    [[nodiscard]] const LawImpl& impl() const noexcept { return *impl_; }

private:
    std::shared_ptr<const LawImpl> impl_;
};

// ---------------------------------------------------------------------------
// Named families
// ---------------------------------------------------------------------------

namespace laws {

class Normal final : public LawImpl {
public:
    Normal(double mean, double sd) : mean_(mean), sd_(sd) {}
    std::string name() const override { return "normal"; }
    Support support() const override { return {-kInf, kInf}; }
    double cdf(double x) const override { return normal_cdf((x - mean_) / sd_); }
    double sf(double x) const override { return normal_sf((x - mean_) / sd_); }
    double quantile(double p) const override { return mean_ + sd_ * normal_quantile(p); }
    double upper_quantile(double q) const override { return mean_ + sd_ * normal_upper_quantile(q); }
    std::optional<double> density(double x) const override { return normal_pdf((x - mean_) / sd_) / sd_; }
    std::optional<double> density_derivative(double x) const override
    {
        const double z = (x - mean_) / sd_;
        return -z * normal_pdf(z) / (sd_ * sd_);
    }

private:
    double mean_, sd_;
};

/// log X ~ N(M, Sigma^2).
class Lognormal final : public LawImpl {
public:
    Lognormal(double log_mean, double log_sd) : m_(log_mean), s_(log_sd) {}
    std::string name() const override { return "lognormal"; }
    Support support() const override { return {0.0, kInf}; }
    double cdf(double x) const override { return x <= 0.0 ? 0.0 : normal_cdf((std::log(x) - m_) / s_); }
    double sf(double x) const override { return x <= 0.0 ? 1.0 : normal_sf((std::log(x) - m_) / s_); }
    double quantile(double p) const override { return std::exp(m_ + s_ * normal_quantile(p)); }
    double upper_quantile(double q) const override { return std::exp(m_ + s_ * normal_upper_quantile(q)); }
    std::optional<double> density(double x) const override
    {
        if (x <= 0.0)
            return 0.0;
        return normal_pdf((std::log(x) - m_) / s_) / (x * s_);
    }
    std::optional<double> density_derivative(double x) const override
    {
        if (x <= 0.0)
            return 0.0;
        const double z = (std::log(x) - m_) / s_;
        const double f = normal_pdf(z) / (x * s_);
        return -f / x * (1.0 + z / s_);
    }

private:
    double m_, s_;
};

class Exponential final : public LawImpl {
public:
    explicit Exponential(double rate) : rate_(rate) {}
    std::string name() const override { return "exponential"; }
    Support support() const override { return {0.0, kInf}; }
    double cdf(double x) const override { return x <= 0.0 ? 0.0 : -std::expm1(-rate_ * x); }
    double sf(double x) const override { return x <= 0.0 ? 1.0 : std::exp(-rate_ * x); }
    double quantile(double p) const override { return -std::log1p(-p) / rate_; }
    double upper_quantile(double q) const override { return -std::log(q) / rate_; }
    std::optional<double> density(double x) const override { return x < 0.0 ? 0.0 : rate_ * std::exp(-rate_ * x); }
    std::optional<double> density_derivative(double x) const override
    {
        return x < 0.0 ? 0.0 : -rate_ * rate_ * std::exp(-rate_ * x);
    }

private:
    double rate_;
};

/// Pareto on [m, inf) with survival (m/x)^alpha.
class Pareto final : public LawImpl {
public:
    Pareto(double scale, double shape) : m_(scale), alpha_(shape) {}
    std::string name() const override { return "pareto"; }
    Support support() const override { return {m_, kInf}; }
    double cdf(double x) const override { return x <= m_ ? 0.0 : -std::expm1(alpha_ * std::log(m_ / x)); }
    double sf(double x) const override { return x <= m_ ? 1.0 : std::pow(m_ / x, alpha_); }
    double quantile(double p) const override { return m_ * std::exp(-std::log1p(-p) / alpha_); }
    double upper_quantile(double q) const override { return m_ * std::pow(q, -1.0 / alpha_); }
    std::optional<double> density(double x) const override
    {
        if (x < m_)
            return 0.0;
        return alpha_ * std::pow(m_, alpha_) / std::pow(x, alpha_ + 1.0);
    }
    std::optional<double> density_derivative(double x) const override
    {
        if (x < m_)
            return 0.0;
        return -(alpha_ + 1.0) * alpha_ * std::pow(m_, alpha_) / std::pow(x, alpha_ + 2.0);
    }

private:
    double m_, alpha_;
};

class Uniform final : public LawImpl {
public:
    Uniform(double lo, double hi) : lo_(lo), hi_(hi) {}
    std::string name() const override { return "uniform"; }
    Support support() const override { return {lo_, hi_}; }
    double cdf(double x) const override { return std::clamp((x - lo_) / (hi_ - lo_), 0.0, 1.0); }
    double sf(double x) const override { return std::clamp((hi_ - x) / (hi_ - lo_), 0.0, 1.0); }
    double quantile(double p) const override { return lo_ + p * (hi_ - lo_); }
    double upper_quantile(double q) const override { return hi_ - q * (hi_ - lo_); }
    std::optional<double> density(double x) const override
    {
        return (x >= lo_ && x <= hi_) ? 1.0 / (hi_ - lo_) : 0.0;
    }
    std::optional<double> density_derivative(double) const override { return 0.0; }

private:
    double lo_, hi_;
};

/// Finite set of atoms; masses sum to one.
class Discrete final : public LawImpl {
public:
    explicit Discrete(std::vector<Atom> atoms)
        : atoms_(std::move(atoms))
    {
        std::sort(atoms_.begin(), atoms_.end(), [](const Atom& a, const Atom& b) { return a.location < b.location; });
        std::vector<Atom> merged;
        for (const Atom& a : atoms_) {
            if (!merged.empty() && merged.back().location == a.location)
                merged.back().mass += a.mass;
            else
                merged.push_back(a);
        }
        atoms_ = std::move(merged);
        cumulative_.resize(atoms_.size());
        tail_.resize(atoms_.size());
        double run = 0.0;
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            run += atoms_[i].mass;
            cumulative_[i] = run;
        }
        run = 0.0;
        for (std::size_t i = atoms_.size(); i-- > 0;) {
            tail_[i] = run; // mass strictly above atom i
            run += atoms_[i].mass;
        }
    }

    std::string name() const override { return atoms_.size() == 1 ? "pointmass" : "discrete"; }
    LawKind kind() const override { return LawKind::discrete; }
    Support support() const override { return {atoms_.front().location, atoms_.back().location}; }
    std::vector<Atom> atoms() const override { return atoms_; }

    double cdf(double x) const override
    {
        const auto it = std::upper_bound(atoms_.begin(), atoms_.end(), x,
                                         [](double v, const Atom& a) { return v < a.location; });
        if (it == atoms_.begin())
            return 0.0;
        if (it == atoms_.end())
            return 1.0;
        return std::min(1.0, cumulative_[static_cast<std::size_t>(it - atoms_.begin()) - 1]);
    }

    double sf(double x) const override
    {
        const auto it = std::upper_bound(atoms_.begin(), atoms_.end(), x,
                                         [](double v, const Atom& a) { return v < a.location; });
        if (it == atoms_.begin())
            return 1.0;
        return tail_[static_cast<std::size_t>(it - atoms_.begin()) - 1];
    }

    double quantile(double p) const override
    {
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            if (cumulative_[i] >= p)
                return atoms_[i].location;
        return atoms_.back().location;
    }

    double upper_quantile(double q) const override
    {
        // smallest atom whose strict upper tail is <= q
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            if (tail_[i] <= q)
                return atoms_[i].location;
        return atoms_.back().location;
    }

    std::optional<double> density(double x) const override
    {
        for (const Atom& a : atoms_)
            if (a.location == x)
                return std::nullopt;
        return 0.0;
    }

private:
    std::vector<Atom> atoms_;
    std::vector<double> cumulative_;
    std::vector<double> tail_;
};

/// Piecewise-linear cdf through (x_i, F_i). A positive F_0 is an atom at x_0.
class EmpiricalGrid final : public LawImpl {
public:
    EmpiricalGrid(std::vector<double> xs, std::vector<double> cdfs)
        : xs_(std::move(xs))
        , fs_(std::move(cdfs))
    {}

    std::string name() const override { return "empirical-grid"; }
    LawKind kind() const override { return fs_.front() > 0.0 ? LawKind::mixed : LawKind::continuous; }
    Support support() const override { return {xs_.front(), xs_.back()}; }
    std::vector<Atom> atoms() const override
    {
        if (fs_.front() > 0.0)
            return {{xs_.front(), fs_.front()}};
        return {};
    }

    bool has_flats() const override
    {
        for (std::size_t i = 1; i < fs_.size(); ++i)
            if (fs_[i] == fs_[i - 1])
                return true;
        return false;
    }

    double cdf(double x) const override
    {
        if (x < xs_.front())
            return 0.0;
        if (x >= xs_.back())
            return 1.0;
        const std::size_t i = segment(x);
        const double w = (x - xs_[i]) / (xs_[i + 1] - xs_[i]);
        return fs_[i] + w * (fs_[i + 1] - fs_[i]);
    }

    double quantile(double p) const override
    {
        if (p <= fs_.front())
            return xs_.front();
        const auto it = std::lower_bound(fs_.begin(), fs_.end(), p);
        const auto j = static_cast<std::size_t>(it - fs_.begin());
        if (j >= fs_.size())
            return xs_.back();
        const std::size_t i = j - 1;
        const double w = (p - fs_[i]) / (fs_[j] - fs_[i]);
        return xs_[i] + w * (xs_[j] - xs_[i]);
    }

    std::optional<double> density(double x) const override
    {
        if (x < xs_.front() || x >= xs_.back())
            return x == xs_.front() && fs_.front() > 0.0 ? std::nullopt : std::optional<double>(0.0);
        if (x == xs_.front() && fs_.front() > 0.0)
            return std::nullopt;
        const std::size_t i = segment(x);
        return (fs_[i + 1] - fs_[i]) / (xs_[i + 1] - xs_[i]);
    }

    std::optional<double> density_derivative(double x) const override
    {
        if (!density(x))
            return std::nullopt;
        return 0.0;
    }

private:
    std::size_t segment(double x) const
    {
        const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        return static_cast<std::size_t>(it - xs_.begin()) - 1;
    }

    std::vector<double> xs_;
    std::vector<double> fs_;
};

/// p * discrete + (1 - p) * continuous.
class Mixture final : public LawImpl {
public:
    Mixture(Distribution discrete, Distribution continuous, double weight)
        : d_(std::move(discrete)), c_(std::move(continuous)), p_(weight)
    {}

    std::string name() const override { return "mixture"; }
    LawKind kind() const override
    {
        if (p_ == 0.0)
            return c_.kind();
        if (p_ == 1.0)
            return d_.kind();
        return atoms().empty() ? LawKind::continuous : LawKind::mixed;
    }
    Support support() const override
    {
        if (p_ == 0.0)
            return c_.support();
        if (p_ == 1.0)
            return d_.support();
        return {std::min(d_.support().lo, c_.support().lo), std::max(d_.support().hi, c_.support().hi)};
    }
    double cdf(double x) const override { return p_ * d_.cdf(x) + (1.0 - p_) * c_.cdf(x); }
    double sf(double x) const override { return p_ * d_.sf(x) + (1.0 - p_) * c_.sf(x); }

    std::vector<Atom> atoms() const override
    {
        std::vector<Atom> out;
        if (p_ > 0.0)
            for (Atom a : d_.atoms())
                out.push_back({a.location, p_ * a.mass});
        if (p_ < 1.0)
            for (Atom a : c_.atoms())
                out.push_back({a.location, (1.0 - p_) * a.mass});
        return out;
    }

    bool has_flats() const override
    {
        if (p_ == 0.0)
            return c_.has_flats();
        if (p_ == 1.0)
            return d_.has_flats();
        if (d_.has_flats() || c_.has_flats())
            return true;
        // components with disjoint supports leave a gap
        const Support a = d_.support();
        const Support b = c_.support();
        return a.hi < b.lo || b.hi < a.lo;
    }

    double quantile(double p) const override
    {
        if (p_ == 0.0)
            return c_.quantile(p);
        if (p_ == 1.0)
            return d_.quantile(p);
        return generic_quantile(p);
    }

    std::optional<double> density(double x) const override
    {
        for (const Atom& a : atoms())
            if (a.location == x)
                return std::nullopt;
        const auto fd = d_.density(x);
        const auto fc = c_.density(x);
        if (!fd || !fc)
            return std::nullopt;
        return p_ * *fd + (1.0 - p_) * *fc;
    }

private:
    Distribution d_, c_;
    double p_;
};

/// Law of X given X > threshold, for a continuous base law.
class ConditionalAbove final : public LawImpl {
public:
    ConditionalAbove(Distribution base, double threshold)
        : base_(std::move(base)), g_(threshold), tail_(base_.sf(threshold))
    {}

    std::string name() const override { return "conditional(" + base_.name() + ")"; }
    Support support() const override { return {std::max(g_, base_.support().lo), base_.support().hi}; }
    double cdf(double x) const override { return x <= g_ ? 0.0 : std::clamp(1.0 - base_.sf(x) / tail_, 0.0, 1.0); }
    double sf(double x) const override { return x <= g_ ? 1.0 : std::min(1.0, base_.sf(x) / tail_); }
    double quantile(double p) const override { return upper_quantile(1.0 - p); }
    double upper_quantile(double q) const override
    {
        const double t = q * tail_;
        if (t >= 1.0)
            return g_;
        return std::max(g_, base_.upper_quantile(t));
    }
    std::optional<double> density(double x) const override
    {
        if (x < g_)
            return 0.0;
        const auto f = base_.density(x);
        if (!f)
            return std::nullopt;
        return *f / tail_;
    }
    std::optional<double> density_derivative(double x) const override
    {
        if (x < g_)
            return 0.0;
        const auto f = base_.density_derivative(x);
        if (!f)
            return std::nullopt;
        return *f / tail_;
    }

private:
    Distribution base_;
    double g_;
    double tail_;
};

} // namespace laws

// ---------------------------------------------------------------------------
// NamedLaw: parameter records for the shipped families
// ---------------------------------------------------------------------------

struct NormalLaw { double M; double Sigma; };
struct LognormalLaw { double M; double Sigma; };
struct ExponentialLaw { double lambda; };
struct ParetoLaw { double m; double alpha; };
struct UniformLaw { double lo; double hi; };
struct PointMassLaw { double k; };
struct TwoPointLaw { double low; double high; double p_low; };
struct DiscreteLaw { std::vector<Atom> atoms; };
struct EmpiricalGridLaw { std::vector<double> x; std::vector<double> F; };

using NamedLaw = std::variant<NormalLaw, LognormalLaw, ExponentialLaw, ParetoLaw, UniformLaw, PointMassLaw,
                              TwoPointLaw, DiscreteLaw, EmpiricalGridLaw>;

inline constexpr std::array<std::string_view, 9> kFamilyNames = {
    "normal", "lognormal", "exponential", "pareto", "uniform", "pointmass", "two-point", "discrete", "empirical-grid"};

namespace detail {

inline void require(bool ok, const std::string& what)
{
    if (!ok)
        fail(ErrorCode::InvalidParameter, what);
}

inline std::shared_ptr<const LawImpl> build(const NormalLaw& l)
{
    require(std::isfinite(l.M), "normal: M must be finite");
    require(l.Sigma > 0.0 && std::isfinite(l.Sigma), "normal: Sigma must be positive");
    return std::make_shared<laws::Normal>(l.M, l.Sigma);
}
inline std::shared_ptr<const LawImpl> build(const LognormalLaw& l)
{
    require(std::isfinite(l.M), "lognormal: M must be finite");
    require(l.Sigma > 0.0 && std::isfinite(l.Sigma), "lognormal: Sigma must be positive");
    return std::make_shared<laws::Lognormal>(l.M, l.Sigma);
}
inline std::shared_ptr<const LawImpl> build(const ExponentialLaw& l)
{
    require(l.lambda > 0.0 && std::isfinite(l.lambda), "exponential: lambda must be positive");
    return std::make_shared<laws::Exponential>(l.lambda);
}
inline std::shared_ptr<const LawImpl> build(const ParetoLaw& l)
{
    require(l.m > 0.0 && std::isfinite(l.m), "pareto: m must be positive");
    require(l.alpha > 0.0 && std::isfinite(l.alpha), "pareto: alpha must be positive");
    return std::make_shared<laws::Pareto>(l.m, l.alpha);
}
inline std::shared_ptr<const LawImpl> build(const UniformLaw& l)
{
    require(std::isfinite(l.lo) && std::isfinite(l.hi) && l.lo < l.hi, "uniform: need finite lo < hi");
    return std::make_shared<laws::Uniform>(l.lo, l.hi);
}
inline std::shared_ptr<const LawImpl> build(const PointMassLaw& l)
{
    require(std::isfinite(l.k), "pointmass: k must be finite");
    return std::make_shared<laws::Discrete>(std::vector<Atom>{{l.k, 1.0}});
}
inline std::shared_ptr<const LawImpl> build(const TwoPointLaw& l)
{
    require(std::isfinite(l.low) && std::isfinite(l.high) && l.low < l.high, "two-point: need finite low < high");
    require(l.p_low > 0.0 && l.p_low < 1.0, "two-point: p_low must lie in (0,1)");
    return std::make_shared<laws::Discrete>(std::vector<Atom>{{l.low, l.p_low}, {l.high, 1.0 - l.p_low}});
}
inline std::shared_ptr<const LawImpl> build(const DiscreteLaw& l)
{
    require(!l.atoms.empty(), "discrete: need at least one atom");
    double total = 0.0;
    for (const Atom& a : l.atoms) {
        require(std::isfinite(a.location), "discrete: atom locations must be finite");
        require(a.mass > 0.0 && a.mass <= 1.0, "discrete: atom masses must lie in (0,1]");
        total += a.mass;
    }
    require(std::abs(total - 1.0) <= 1e-12, "discrete: atom masses must sum to 1");
    return std::make_shared<laws::Discrete>(l.atoms);
}
inline std::shared_ptr<const LawImpl> build(const EmpiricalGridLaw& l)
{
    require(l.x.size() == l.F.size() && l.x.size() >= 2, "empirical-grid: need matching x and F of length >= 2");
    for (std::size_t i = 0; i < l.x.size(); ++i) {
        require(std::isfinite(l.x[i]) && std::isfinite(l.F[i]), "empirical-grid: values must be finite");
        require(l.F[i] >= 0.0 && l.F[i] <= 1.0, "empirical-grid: F must lie in [0,1]");
        if (i > 0) {
            require(l.x[i - 1] < l.x[i], "empirical-grid: x must be strictly increasing");
            require(l.F[i - 1] <= l.F[i], "empirical-grid: F must be non-decreasing");
        }
    }
    require(l.F.back() == 1.0, "empirical-grid: last F must equal 1");
    return std::make_shared<laws::EmpiricalGrid>(l.x, l.F);
}

} // namespace detail

inline Distribution make(const NamedLaw& law)
{
    return Distribution(std::visit([](const auto& l) { return detail::build(l); }, law));
}

inline Distribution normal(double M, double Sigma) { return make(NormalLaw{M, Sigma}); }
inline Distribution lognormal(double M, double Sigma) { return make(LognormalLaw{M, Sigma}); }
inline Distribution exponential(double lambda) { return make(ExponentialLaw{lambda}); }
inline Distribution pareto(double m, double alpha) { return make(ParetoLaw{m, alpha}); }
inline Distribution uniform(double lo, double hi) { return make(UniformLaw{lo, hi}); }
inline Distribution pointmass(double k) { return make(PointMassLaw{k}); }
inline Distribution two_point(double low, double high, double p_low) { return make(TwoPointLaw{low, high, p_low}); }

/// Mixture p * F_D + (1 - p) * F_C.
inline Distribution mix(const Distribution& discrete_part, const Distribution& continuous_part, double p)
{
    if (!(p >= 0.0 && p <= 1.0))
        fail(ErrorCode::InvalidParameter, "mixture weight must lie in [0,1]");
    return Distribution(std::make_shared<laws::Mixture>(discrete_part, continuous_part, p));
}

inline Distribution conditional_above(const Distribution& base, double threshold)
{
    if (!(base.sf(threshold) > 0.0))
        fail(ErrorCode::InvalidParameter, "conditioning event has zero probability");
    if (!base.atoms().empty())
        fail(ErrorCode::InvalidParameter, "conditional_above needs a continuous base law");
    return Distribution(std::make_shared<laws::ConditionalAbove>(base, threshold));
}

/// Law of max(G, S) with log S ~ N(M, s^2): an atom at G of mass
/// Phi((ln G - M)/s) mixed with the conditional lognormal above G.
inline Distribution capital_guarantee(double G, double M, double s)
{
    if (!(G > 0.0))
        fail(ErrorCode::InvalidParameter, "capital guarantee level must be positive");
    const Distribution stock = lognormal(M, s);
    const double p = stock.cdf(G);
    return mix(pointmass(G), conditional_above(stock, G), p);
}

/// f(x) / (1 - F(x)).
inline double hazard(const Distribution& d, double x)
{
    const auto f = d.density(x);
    if (!f)
        fail(ErrorCode::UndefinedHazard, "no density at x = " + std::to_string(x));
    const double s = d.sf(x);
    if (!(s > 0.0))
        fail(ErrorCode::UndefinedHazard, "survival is zero at x = " + std::to_string(x));
    return *f / s;
}

/// sup |F1 - F2| over the given points (any number, any order).
inline double ks_distance(const Distribution& d1, const Distribution& d2, const std::vector<double>& points)
{
    double worst = 0.0;
    for (double x : points)
        worst = std::max(worst, std::abs(d1.cdf(x) - d2.cdf(x)));
    return worst;
}

inline double ks_distance(const Distribution& d1, const Distribution& d2, const Grid& grid)
{
    return ks_distance(d1, d2, std::vector<double>(grid.begin(), grid.end()));
}

/// Grid of quantiles F^{-1}(p) for p uniform on [p_lo, p_hi]; duplicate
/// points (atoms) are dropped.
inline Grid quantile_grid(const Distribution& d, double p_lo, double p_hi, std::size_t n)
{
    std::vector<double> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = p_lo + (p_hi - p_lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        const double x = d.quantile(p);
        if (pts.empty() || x > pts.back())
            pts.push_back(x);
    }
    return Grid(std::move(pts));
}

} // namespace utilityforge
