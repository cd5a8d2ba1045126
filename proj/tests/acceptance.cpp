// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Tolerances are fixed here and must not be loosened to make a line pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "utilityforge/discrete.hpp"
#include "utilityforge/efficiency.hpp"
#include "utilityforge/risk_aversion.hpp"
#include "utilityforge/utility.hpp"

using namespace utilityforge;

namespace {

const BsParams kMarket{0.08, 0.2, 0.03, 1.0, 1.0};

struct Check {
    bool ok = true;
    std::ostringstream why;

    void expect(bool cond, const std::string& what)
    {
        if (!cond) {
            ok = false;
            why << " [" << what << "]";
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string g(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::vector<double> levels(double lo, double hi, std::size_t n)
{
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i)
        p[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return p;
}

std::vector<double> ks_points(const Distribution& F)
{
    const Grid grid = quantile_grid(F, 1e-4, 1.0 - 1e-4, 2001);
    return {grid.begin(), grid.end()};
}

// 1. lognormal target gives CRRA with rho = theta sqrt(T) / Sigma
void crra_recovery(Check& c)
{
    const auto t0 = std::chrono::steady_clock::now();
    const PricingKernel k = bs_kernel(kMarket);
    const Distribution F = lognormal(0.05, 0.2);
    const double rho = oracle::crra_rho(oracle::Market{}, 0.2);
    c.expect(std::abs(rho - 1.25) <= 1e-15, "oracle rho " + g(rho));
    double worst = 0.0;
    for (double p : levels(0.05, 0.95, 181))
        worst = std::max(worst, std::abs(rra(F, k, F.quantile(p)) - 1.25));
    c.expect(worst <= 1e-6, "rra error " + g(worst));
    const UtilityCurve u = infer_utility(F, k);
    const double res = affine_match(u, CrraFamily{1.25}, quantile_grid(F, 0.05, 0.95, 181));
    c.expect(res <= 1e-6, "affine residual " + g(res));
    const double secs = seconds_since(t0);
    c.expect(secs < 5.0, "runtime " + g(secs) + "s");
    c.why << " rra_err=" << g(worst) << " residual=" << g(res) << " t=" << g(secs) << "s";
}

// 2. normal target gives constant ARA theta sqrt(T) / Sigma and sits on the DARA boundary
void cara_recovery(Check& c)
{
    const PricingKernel k = bs_kernel(kMarket);
    const Distribution F = normal(1.0, 0.3);
    const double want = 0.25 / 0.3;
    double worst = 0.0;
    for (double p : levels(0.05, 0.95, 181))
        worst = std::max(worst, std::abs(ara(F, k, F.quantile(p)) - want));
    c.expect(worst <= 1e-6, "ara error " + g(worst));
    const DaraVerdict v = dara_bs(F);
    c.expect(!v.is_dara, "dara_bs says DARA");
    c.expect(std::abs(v.margin) <= 1e-9, "margin " + g(v.margin));
    c.why << " ara_err=" << g(worst) << " margin=" << g(v.margin);
}

// 3. CARA(2) optimum is normal with closed-form mean and variance
void cara_closed_form(Check& c)
{
    const PricingKernel k = bs_kernel(kMarket);
    const oracle::Market m;
    const double gamma = 2.0, X0 = 1.0;
    const OptimalPayoff o = optimal_payoff(make_utility(CaraFamily{gamma}), k, X0);
    const oracle::NormalLawParams law = oracle::cara_optimal_law(m, gamma, X0);
    // mean X0 e^{rT} + (theta/(gamma sigma))(mu - r)T, sd theta sqrt(T) / gamma
    const double mean = X0 * std::exp(m.r * m.T) + m.theta() / (gamma * m.sigma) * (m.mu - m.r) * m.T;
    const double sd = m.theta() / gamma * std::sqrt(m.T);
    c.expect(std::abs(law.mean - mean) <= 1e-14 && std::abs(law.sd - sd) <= 1e-14, "oracle law mismatch");
    const Distribution N = normal(mean, sd);
    const double ks = ks_distance(pushforward(o.payoff, k), N, ks_points(N));
    c.expect(ks <= 1e-6, "KS " + g(ks));
    const double err = std::abs(cost(o.payoff, k) - 1.0);
    c.expect(err <= 1e-8, "cost error " + g(err));
    c.why << " ks=" << g(ks) << " cost_err=" << g(err);
}

// 4. round trips in both directions
void round_trips(Check& c)
{
    const PricingKernel k = bs_kernel(kMarket);
    double worst_ks = 0.0;
    for (const Distribution& F : {normal(1.0, 0.3), lognormal(0.05, 0.2), exponential(1.0), pareto(1.0, 3.0)}) {
        const OptimalPayoff o = optimal_payoff(infer_utility(F, k), k, distributional_price(F, k));
        const double ks = ks_distance(pushforward(o.payoff, k), F, ks_points(F));
        c.expect(ks <= 1e-6, F.name() + " KS " + g(ks));
        worst_ks = std::max(worst_ks, ks);
    }
    double worst_res = 0.0;
    const std::vector<ParametricFamily> fams = {CrraFamily{2.0}, CaraFamily{1.5}, HaraFamily{1.0, 1.0, 0.5}};
    for (const ParametricFamily& fam : fams) {
        const OptimalPayoff o = optimal_payoff(make_utility(fam), k, 1.0);
        const Distribution law = pushforward(o.payoff, k);
        const double res = affine_match(infer_utility(law, k), fam, quantile_grid(law, 0.05, 0.95, 181));
        c.expect(res <= 1e-6, family_name(fam) + " residual " + g(res));
        worst_res = std::max(worst_res, res);
    }
    c.why << " worst_ks=" << g(worst_ks) << " worst_residual=" << g(worst_res);
}

// 5. capital guarantee and Yaari generalized utilities
void generalized(Check& c)
{
    const PricingKernel k = bs_kernel(kMarket);
    const oracle::Market m;
    const double G = 0.9, M = 0.05;
    const GeneralizedUtility cg = infer_generalized_utility(capital_guarantee(G, M, 0.2), k);
    for (double x : {0.0, 0.5, 0.89, 0.8999})
        c.expect(cg.value(x).is_minus_infinity(), "U(" + g(x) + ") finite");
    const double ratio = m.theta() / m.sigma;
    const double a = std::exp(M * ratio - m.r * m.T - 0.5 * m.theta() * m.theta() * m.T);
    double worst = 0.0;
    for (double x : levels(0.901, 4.0, 200)) {
        const double want = a * std::pow(x, -ratio);
        worst = std::max(worst, std::abs(cg.marginal(x).value() - want) / want);
    }
    c.expect(worst <= 1e-6, "guarantee marginal rel error " + g(worst));

    const double cc = 1.2, X0 = 1.0;
    const YaariSetup y = yaari_setup(k, cc, X0);
    // B from the budget: B * E[xi 1{xi <= c}] = X0
    const double B = X0 / oracle::digital_price(m, cc);
    c.expect(std::abs(y.B - B) <= 1e-10 * B, "B " + g(y.B) + " vs " + g(B));
    const GeneralizedUtility yu = infer_generalized_utility(y.law, k);
    double slope_err = 0.0;
    const double base = yu.value(0.0).value();
    for (double x : levels(0.0, y.B, 101)) {
        slope_err = std::max(slope_err, std::abs(yu.marginal(x).value() - cc));
        if (x > 0.0)
            slope_err = std::max(slope_err, std::abs((yu.value(x).value() - base) / x - cc));
    }
    c.expect(slope_err <= 1e-10, "Yaari slope error " + g(slope_err));
    const OptimalPayoff o = optimal_payoff(yu, k, X0);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < 1001; ++i) {
        const KernelState s = k.at((static_cast<double>(i) + 0.5) / 1001.0);
        if (o.payoff(s) != (s.xi <= cc ? y.B : 0.0))
            ++mismatches;
    }
    c.expect(mismatches == 0, std::to_string(mismatches) + " digital mismatches");
    c.why << " guarantee_rel=" << g(worst) << " B=" << y.B << " yaari_slope=" << g(slope_err) << " mismatches=" << mismatches;
}

// 6. DARA verdict table under Black-Scholes
void dara_table(Check& c)
{
    struct Row {
        Distribution F;
        bool dara;
    };
    const std::vector<Row> rows = {{lognormal(0.05, 0.2), true}, {exponential(1.0), true}, {pareto(1.0, 3.0), true},
                                   {normal(1.0, 0.3), false},    {uniform(0.0, 1.0), false}};
    double slowest = 0.0;
    for (const Row& r : rows) {
        const auto t0 = std::chrono::steady_clock::now();
        const DaraVerdict v = dara_bs(r.F);
        const double secs = seconds_since(t0);
        slowest = std::max(slowest, secs);
        c.expect(v.is_dara == r.dara, r.F.name() + " verdict");
        c.expect(secs < 1.0, r.F.name() + " took " + g(secs) + "s");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const DaraVerdict h = dara_hazard_sufficient(pareto(1.0, 3.0));
    const double secs = seconds_since(t0);
    slowest = std::max(slowest, secs);
    c.expect(h.is_dara, "pareto hazard-sufficient");
    c.expect(secs < 1.0, "hazard check took " + g(secs) + "s");
    c.why << " slowest=" << g(slowest) << "s";
}

// 7. seeded band rearrangements never beat the distributional price
void dominance(Check& c)
{
    const PricingKernel k = bs_kernel(kMarket);
    std::mt19937_64 rng(20240607);
    std::uniform_int_distribution<std::size_t> bands(2, 10);
    std::size_t nontrivial = 0, strict = 0;
    double worst_gap = kInf;
    for (const Distribution& F : {normal(1.0, 0.3), lognormal(0.05, 0.2), exponential(1.0), pareto(1.0, 3.0), uniform(0.0, 1.0)}) {
        const Payoff x = efficient_payoff(F, k);
        const double dp = distributional_price(F, k);
        for (int t = 0; t < 200; ++t) {
            std::vector<std::size_t> perm(bands(rng));
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            std::shuffle(perm.begin(), perm.end(), rng);
            const double gap = cost(rearrange_bands(x, k, perm), k) - dp;
            worst_gap = std::min(worst_gap, gap);
            c.expect(gap >= -1e-8, F.name() + " rearrangement below price by " + g(-gap));
            if (!std::is_sorted(perm.begin(), perm.end())) {
                ++nontrivial;
                if (gap > 1e-6)
                    ++strict;
            }
        }
    }
    const double share = nontrivial ? static_cast<double>(strict) / static_cast<double>(nontrivial) : 0.0;
    c.expect(share >= 0.95, "strict share " + g(share));
    c.why << " min_gap=" << g(worst_gap) << " strict=" << strict << "/" << nontrivial;
}

// 8. anti-monotone is not optimal once probabilities differ
void counterexample(Check& c)
{
    const CounterexampleReport r = counterexample_nonequiprobable();
    c.expect(r.cost_xstar == Rational(1), "E[xi X*]");
    c.expect(r.cost_y == Rational(1), "E[xi Y]");
    c.expect(r.expected_utility_xstar == Rational(2, 3), "E[U(X*)]");
    c.expect(r.expected_utility_y_bound >= Rational(7, 9), "E[U(Y)] bound");
    c.expect(r.min_random_expected_utility_y >= 7.0 / 9.0 - 1e-12, "random utility below 7/9");
    c.expect(r.holds, "report says it fails");
    c.why << " E[U(X*)]=" << r.expected_utility_xstar << " E[U(Y)]>=" << r.expected_utility_y_bound;
}

// 9. both discrete constructions rationalize random strict optima
void discrete_optimality(Check& c)
{
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> size(2, 6);
    std::uniform_real_distribution<double> xi_draw(0.2, 3.0), step(0.05, 1.0), start(-1.0, 2.0);
    std::size_t violations = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = size(rng);
        std::vector<double> xi(n);
        bool distinct = false;
        while (!distinct) {
            for (double& v : xi)
                v = xi_draw(rng);
            std::vector<double> s = xi;
            std::sort(s.begin(), s.end());
            distinct = std::adjacent_find(s.begin(), s.end(), [](double a, double b) { return b - a < 1e-3; }) == s.end();
        }
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xi[a] > xi[b]; });
        std::vector<double> x(n);
        double level = start(rng);
        for (std::size_t r = 0; r < n; ++r) {
            x[order[r]] = level;
            level += step(rng);
        }
        const DiscreteMarket mk = DiscreteMarket::equiprobable(xi);
        const Allocation xs{x};
        const OptimalityReport a = verify_optimality(mk, paper_step_utility(mk, xs), xs, 10000, static_cast<std::uint64_t>(t));
        const OptimalityReport b = verify_optimality(mk, peleg_yaari_utility(mk, xs), xs, 10000, static_cast<std::uint64_t>(t));
        const auto perms = check_all_permutations(mk, xs);
        violations += a.pathwise_violations.size() + a.random_violations + b.pathwise_violations.size() + b.random_violations;
        c.expect(a.ok && a.trials == 10000, "paper-step instance " + std::to_string(t));
        c.expect(b.ok && b.trials == 10000, "peleg-yaari instance " + std::to_string(t));
        c.expect(perms.antimonotone_is_minimal, "permutation check instance " + std::to_string(t));
    }
    c.expect(violations == 0, std::to_string(violations) + " violations");
    c.why << " instances=50 violations=" << violations;
}

// 10. ARA scales with the Sharpe ratio
void proportionality(Check& c)
{
    const Distribution F = lognormal(0.05, 0.2);
    const std::vector<double> thetas = {0.1, 0.25, 0.5};
    std::vector<PricingKernel> ks;
    for (double th : thetas)
        ks.push_back(bs_kernel({0.03 + th * 0.2, 0.2, 0.03, 1.0, 1.0}));
    double worst = 0.0;
    for (double p : levels(0.05, 0.95, 19)) {
        const double x = F.quantile(p);
        for (std::size_t i = 0; i < thetas.size(); ++i)
            for (std::size_t j = i + 1; j < thetas.size(); ++j) {
                const double got = ara(F, ks[i], x) / ara(F, ks[j], x);
                worst = std::max(worst, std::abs(got - thetas[i] / thetas[j]));
            }
    }
    c.expect(worst <= 1e-8, "ratio error " + g(worst));
    c.why << " ratio_err=" << g(worst);
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<void(Check&)>>> criteria = {
        {"crra-recovery", crra_recovery},
        {"cara-recovery", cara_recovery},
        {"cara-optimal-law", cara_closed_form},
        {"round-trips", round_trips},
        {"generalized-utilities", generalized},
        {"dara-table", dara_table},
        {"dominance", dominance},
        {"discrete-counterexample", counterexample},
        {"discrete-optimality", discrete_optimality},
        {"proportionality", proportionality},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        try {
            criteria[i].second(c);
        } catch (const std::exception& e) {
            c.ok = false;
            c.why << " exception: " << e.what();
        }
        std::printf("%s %zu %s%s\n", c.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, c.why.str().c_str());
        std::fflush(stdout);
        failed += !c.ok;
    }
    return failed ? 1 : 0;
}
