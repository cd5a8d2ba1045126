#pragma once

// Reference values computed independently of the library: closed forms,
// extended-precision special functions, Boost quadrature and Monte Carlo.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

using big = boost::multiprecision::cpp_bin_float_50;

inline double normal_quantile(double p)
{
    const big two(2);
    const big z = -boost::multiprecision::sqrt(two) * boost::math::erfc_inv(two * big(p));
    return static_cast<double>(z);
}

inline double normal_cdf(double z)
{
    const big v = boost::math::erfc(-big(z) / boost::multiprecision::sqrt(big(2))) / 2;
    return static_cast<double>(v);
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

/// sqrt(2) by bisection in 50-digit arithmetic.
inline double sqrt2_bisection()
{
    big lo(1), hi(2);
    for (int i = 0; i < 200; ++i) {
        const big mid = (lo + hi) / 2;
        if (mid * mid < 2)
            lo = mid;
        else
            hi = mid;
    }
    return static_cast<double>(lo);
}

/// Adaptive Gauss-Kronrod (61 points) on a finite interval. The tolerance is
/// relative, so the depth is capped for integrals that are close to zero.
template <class F>
double gk61(F f, double a, double b, double tol = 1e-13)
{
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 12, tol);
}

struct Market {
    double mu = 0.08, sigma = 0.2, r = 0.03, T = 1.0, S0 = 1.0;
    [[nodiscard]] double theta() const { return (mu - r) / sigma; }
    /// log xi ~ N(m, s^2)
    [[nodiscard]] double m() const { return -r * T - 0.5 * theta() * theta() * T; }
    [[nodiscard]] double s() const { return std::abs(theta()) * std::sqrt(T); }
};

/// Lognormal(M, Sigma) target: U'(x) = a x^{-rho}.
inline double crra_rho(const Market& k, double Sigma) { return k.theta() * std::sqrt(k.T) / Sigma; }
inline double crra_a(const Market& k, double M, double Sigma)
{
    return std::exp(M * k.theta() * std::sqrt(k.T) / Sigma - k.r * k.T - 0.5 * k.theta() * k.theta() * k.T);
}

/// Distributional price of LN(M, Sigma): E[xi K xi^{-Sigma/s}] with
/// K = exp(M - (Sigma/s)(rT + theta^2 T/2)).
inline double lognormal_price(const Market& k, double M, double Sigma)
{
    const double e = -Sigma / k.s();
    const double K = std::exp(M - (Sigma / k.s()) * (k.r * k.T + 0.5 * k.theta() * k.theta() * k.T));
    // E[xi^{1+e}] for log xi ~ N(m, s^2)
    return K * std::exp((1.0 + e) * k.m() + 0.5 * (1.0 + e) * (1.0 + e) * k.s() * k.s());
}

/// Price of the normal(M, Sigma) law by Monte Carlo on the efficient payoff
/// M - Sigma * z where log xi = m + s z.
inline double normal_price_mc(const Market& k, double M, double Sigma, std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < n / 2; ++i) {
        const double w = z(rng);
        for (double zz : {w, -w}) {
            const double xi = std::exp(k.m() + k.s() * zz);
            acc += xi * (M - Sigma * zz);
        }
    }
    return acc / static_cast<double>(2 * (n / 2));
}

/// CARA(gamma) optimum: X = X0 e^{rT} - (theta/(gamma sigma))(r - sigma^2/2)T
/// + (theta/(gamma sigma)) ln(S/S0); law N(mean, (theta/gamma)^2 T).
struct NormalLawParams {
    double mean;
    double sd;
};
inline NormalLawParams cara_optimal_law(const Market& k, double gamma, double X0)
{
    const double th = k.theta();
    return {X0 * std::exp(k.r * k.T) + th / (gamma * k.sigma) * (k.mu - k.r) * k.T, std::abs(th / gamma) * std::sqrt(k.T)};
}
inline double cara_optimal_payoff(const Market& k, double gamma, double X0, double S)
{
    const double c = k.theta() / (gamma * k.sigma);
    return X0 * std::exp(k.r * k.T) - c * (k.r - 0.5 * k.sigma * k.sigma) * k.T + c * std::log(S / k.S0);
}

/// HARA(a, b, gamma) optimum X = C (S/S0)^{theta/(sigma(1-gamma))} - b(1-gamma)/a.
inline double hara_C(const Market& k, double a, double b, double g, double X0)
{
    const double th = k.theta();
    const double num = X0 * std::exp(k.r * k.T) + b * (1.0 - g) / a;
    const double den = std::exp(th / (k.sigma * (1.0 - g)) * (k.r - 0.5 * k.sigma * k.sigma) * k.T
                                + std::pow(th / (1.0 - g), 2) * k.T / 2.0);
    return num / den;
}

/// Shifted-lognormal law of the HARA optimum (positive exponent case).
inline double hara_cdf(const Market& k, double a, double b, double g, double X0, double y)
{
    const double th = k.theta();
    const double shift = b * (1.0 - g) / a;
    const double C = hara_C(k, a, b, g, X0);
    const double e = th / (k.sigma * (1.0 - g));
    const double mean = std::log(C) + e * (k.mu - 0.5 * k.sigma * k.sigma) * k.T;
    const double sd = std::abs(th / (1.0 - g)) * std::sqrt(k.T);
    const double z = (std::log(y + shift) - mean) / sd;
    return e > 0 ? normal_cdf(z) : 1.0 - normal_cdf(z);
}

/// Absolute risk aversion of the exponential(lambda) law in a BS market.
inline double ara_exponential(const Market& k, double lambda, double x)
{
    const double z = normal_quantile(std::exp(-lambda * x));
    return k.theta() * lambda * std::sqrt(2.0 * std::numbers::pi * k.T) * std::exp(-lambda * x + 0.5 * z * z);
}

/// Absolute risk aversion of the Pareto(m, alpha) law in a BS market.
inline double ara_pareto(const Market& k, double m, double alpha, double x)
{
    const double z = normal_quantile(std::pow(m / x, alpha));
    return k.theta() * alpha * std::pow(m, alpha) * std::sqrt(2.0 * std::numbers::pi * k.T) / std::pow(x, alpha + 1.0)
        * std::exp(0.5 * z * z);
}

/// Digital price E[xi 1{xi <= c}] = e^{-rT} Phi((ln c + rT - theta^2 T/2)/(theta sqrt T)).
inline double digital_price(const Market& k, double c)
{
    const double d = (std::log(c) + k.r * k.T - 0.5 * k.theta() * k.theta() * k.T) / k.s();
    return std::exp(-k.r * k.T) * normal_cdf(d);
}

} // namespace oracle
