#pragma once

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "oracles.hpp"
#include "utilityforge/distributions.hpp"
#include "utilityforge/error.hpp"
#include "utilityforge/market.hpp"

namespace testing_support {

inline const utilityforge::BsParams kBs{0.08, 0.2, 0.03, 1.0, 1.0};

/// Error code raised by fn, or a test failure if nothing is thrown.
template <class Fn>
utilityforge::ErrorCode code_of(Fn&& fn)
{
    try {
        fn();
    } catch (const utilityforge::Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return utilityforge::ErrorCode::ConfigError;
}

/// shift + exp(N(mean, sd^2)), written out independently of the library laws.
class ShiftedLognormal final : public utilityforge::LawImpl {
public:
    ShiftedLognormal(double shift, double mean, double sd)
        : shift_(shift), mean_(mean), sd_(sd)
    {}
    std::string name() const override { return "shifted-lognormal"; }
    utilityforge::Support support() const override { return {shift_, utilityforge::kInf}; }
    double cdf(double x) const override
    {
        return x <= shift_ ? 0.0 : 0.5 * std::erfc(-(std::log(x - shift_) - mean_) / (sd_ * std::sqrt(2.0)));
    }
    double sf(double x) const override
    {
        return x <= shift_ ? 1.0 : 0.5 * std::erfc((std::log(x - shift_) - mean_) / (sd_ * std::sqrt(2.0)));
    }
    double quantile(double p) const override { return shift_ + std::exp(mean_ + sd_ * oracle::normal_quantile(p)); }
    double upper_quantile(double q) const override { return shift_ + std::exp(mean_ - sd_ * oracle::normal_quantile(q)); }
    std::optional<double> density(double x) const override
    {
        if (x <= shift_)
            return 0.0;
        const double y = x - shift_;
        const double z = (std::log(y) - mean_) / sd_;
        return oracle::normal_pdf(z) / (sd_ * y);
    }

private:
    double shift_, mean_, sd_;
};

inline utilityforge::Distribution shifted_lognormal(double shift, double mean, double sd)
{
    return utilityforge::Distribution(std::make_shared<ShiftedLognormal>(shift, mean, sd));
}

/// Law of the HARA optimum as a shifted lognormal (positive exponent case).
inline utilityforge::Distribution hara_law(const oracle::Market& k, double a, double b, double g, double X0)
{
    const double e = k.theta() / (k.sigma * (1.0 - g));
    const double C = oracle::hara_C(k, a, b, g, X0);
    const double mean = std::log(C) + e * (k.mu - 0.5 * k.sigma * k.sigma) * k.T;
    const double sd = std::abs(k.theta() / (1.0 - g)) * std::sqrt(k.T);
    return shifted_lognormal(-b * (1.0 - g) / a, mean, sd);
}

} // namespace testing_support
