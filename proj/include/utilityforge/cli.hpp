#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "utilityforge/discrete.hpp"
#include "utilityforge/distributions.hpp"
#include "utilityforge/efficiency.hpp"
#include "utilityforge/error.hpp"
#include "utilityforge/io.hpp"
#include "utilityforge/market.hpp"
#include "utilityforge/risk_aversion.hpp"
#include "utilityforge/utility.hpp"

namespace utilityforge::cli {

using json = nlohmann::json;

inline const std::vector<std::string> kCommands = {
    "infer-utility", "infer-generalized", "price", "efficient-payoff", "audit", "optimal-payoff",
    "risk-aversion", "dara-test", "rationalize-discrete", "validate"};

struct RunConfig {
    std::string command;

    // market: file, optionally overridden by inline Black-Scholes flags
    std::string market_path;
    std::optional<double> mu, sigma, r, T, S0;

    // target law: inline family + params, a JSON file, or an (x,F) CSV
    std::string target;
    std::map<std::string, double> target_params;
    std::string target_file;
    std::string empirical;

    std::optional<std::size_t> grid_size;
    std::optional<double> p_lo, p_hi;
    std::optional<double> anchor;

    std::string out;
    std::string format = "csv";
    std::string report;

    // infer-utility --fit
    std::string fit;
    std::map<std::string, double> fit_params;

    // price / audit
    std::string payoff;

    // optimal-payoff
    std::string utility;
    std::map<std::string, double> utility_params;
    std::string utility_csv;
    std::optional<double> budget;

    // rationalize-discrete
    std::string discrete_path;
    std::string construction = "both";
    std::size_t trials = 10000;

    // dara-test
    std::string criterion = "all";

    // validate
    std::string validate_path;
    std::string validate_kind = "auto";

    std::uint64_t seed = 0;
    Tolerance tol{};
};

struct Report {
    json body;
    int exit_code = 0;
};

namespace detail {

inline std::string fnv1a_hex(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline json extended(double v)
{
    if (std::isinf(v))
        return v > 0 ? "+inf" : "-inf";
    return v;
}

inline double param(const std::map<std::string, double>& p, const std::string& key, const std::string& what)
{
    const auto it = p.find(key);
    if (it == p.end())
        fail(ErrorCode::ConfigError, what + " needs --" + key);
    return it->second;
}

inline std::optional<double> maybe(const std::map<std::string, double>& p, const std::string& key)
{
    const auto it = p.find(key);
    if (it == p.end())
        return std::nullopt;
    return it->second;
}

inline Tolerance env_tolerance()
{
    Tolerance t{};
    if (const char* env = std::getenv("UTILITYFORGE_TOL")) {
        const double v = io::parse_number(env, "UTILITYFORGE_TOL");
        if (!(v > 0.0) || !std::isfinite(v))
            fail(ErrorCode::ConfigError, "UTILITYFORGE_TOL must be a positive number");
        t.abs_tol = v;
        t.rel_tol = v;
    }
    return t;
}

struct Context {
    const RunConfig& cfg;
    json inputs = json::object();
    json outputs = json::object();
    json files = json::array();
    json warnings = json::array();

    void warn(const std::string& w) { warnings.push_back(w); }

    io::MarketSpec market_spec()
    {
        io::MarketSpec m;
        if (!cfg.market_path.empty()) {
            m = io::market_from_json(io::read_json(cfg.market_path), cfg.market_path);
        } else if (cfg.mu || cfg.sigma || cfg.r || cfg.T) {
            m.bs = BsParams{};
        } else {
            fail(ErrorCode::ConfigError, "a market is required: --market FILE or --mu/--sigma/--r/--T");
        }
        if (cfg.mu || cfg.sigma || cfg.r || cfg.T || cfg.S0) {
            if (!m.bs)
                fail(ErrorCode::ConfigError, "inline market flags need a Black-Scholes market");
            json j = io::market_to_json(m);
            if (cfg.mu) j["mu"] = *cfg.mu;
            if (cfg.sigma) j["sigma"] = *cfg.sigma;
            if (cfg.r) j["r"] = *cfg.r;
            if (cfg.T) j["T"] = *cfg.T;
            if (cfg.S0) j["S0"] = *cfg.S0;
            m = io::market_from_json(j, "market flags");
        }
        inputs["market"] = io::market_to_json(m);
        return m;
    }

    PricingKernel kernel() { return market_spec().kernel(); }

    Distribution target_law()
    {
        const int given = (!cfg.target.empty()) + (!cfg.target_file.empty()) + (!cfg.empirical.empty());
        if (given != 1)
            fail(ErrorCode::ConfigError, "give exactly one of --target, --target-file, --empirical");
        if (!cfg.empirical.empty()) {
            inputs["target"] = {{"empirical", cfg.empirical}};
            return io::empirical_from_csv(cfg.empirical);
        }
        json j;
        if (!cfg.target_file.empty()) {
            j = io::read_json(cfg.target_file);
        } else {
            json params = json::object();
            for (const auto& [k, v] : cfg.target_params)
                params[k] = v;
            j = {{"family", cfg.target}, {"params", params}};
        }
        const NamedLaw law = io::named_law_from_json(j, "target");
        inputs["target"] = io::named_law_to_json(law);
        return io::detail::as_config("target", [&] { return make(law); });
    }

    Grid quantile_grid_for(const Distribution& F, std::size_t n_default, double lo_default, double hi_default)
    {
        const std::size_t n = cfg.grid_size.value_or(n_default);
        const double lo = cfg.p_lo.value_or(lo_default);
        const double hi = cfg.p_hi.value_or(hi_default);
        if (n < 2)
            fail(ErrorCode::ConfigError, "--grid-size must be at least 2");
        if (!(lo > 0.0 && lo < hi && hi < 1.0))
            fail(ErrorCode::ConfigError, "quantile range needs 0 < p-lo < p-hi < 1");
        inputs["grid"] = {{"size", n}, {"p_lo", lo}, {"p_hi", hi}};
        std::vector<double> pts;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
            const double x = p <= 0.5 ? F.impl().quantile(p) : F.impl().upper_quantile(1.0 - p);
            if (pts.empty() || x > pts.back())
                pts.push_back(x);
        }
        if (pts.size() < 2)
            fail(ErrorCode::ConfigError, "quantile grid collapses to a single point; widen the range");
        return Grid(std::move(pts));
    }

    void emit(const io::Table& t, const std::string& path_override = {})
    {
        const std::string path = path_override.empty() ? cfg.out : path_override;
        json j = json::object();
        for (std::size_t i = 0; i < t.header.size(); ++i) {
            json col = json::array();
            for (double v : t.columns[i])
                col.push_back(extended(v));
            j[t.header[i]] = col;
        }
        outputs["rows"] = t.rows();
        if (path.empty()) {
            outputs["table"] = j;
            return;
        }
        if (cfg.format == "json") {
            io::write_file(path, j.dump(1) + "\n");
        } else {
            io::write_file(path, io::to_csv(t));
        }
        files.push_back(path);
    }
};

inline json verdict_json(const DaraVerdict& v)
{
    json j = {{"is_dara", v.is_dara},
              {"is_asymptotic_dara", v.is_asymptotic_dara},
              {"criterion_used", std::string(to_string(v.criterion_used))},
              {"margin", extended(v.margin)},
              {"check_margin", extended(v.check_margin)},
              {"checks_agree", v.checks_agree},
              {"boundary", std::abs(v.margin) <= kConvexityEps}};
    j["witness"] = v.witness ? json(*v.witness) : json(nullptr);
    j["asymptotic_from"] = v.asymptotic_from ? json(*v.asymptotic_from) : json(nullptr);
    return j;
}

inline ParametricFamily family_from(const std::string& name, const std::map<std::string, double>& p, const std::string& what)
{
    if (name == "crra")
        return CrraFamily{param(p, "rho", what), maybe(p, "scale").value_or(1.0)};
    if (name == "cara")
        return CaraFamily{param(p, "gamma", what)};
    if (name == "hara")
        return HaraFamily{param(p, "hara-a", what), param(p, "hara-b", what), param(p, "gamma", what)};
    if (name == "log")
        return LogFamily{};
    if (name == "yaari")
        return YaariFamily{param(p, "c", what), param(p, "B", what)};
    if (name == "guarantee-crra")
        return GuaranteeCrraFamily{param(p, "G", what), param(p, "rho", what), maybe(p, "scale").value_or(1.0)};
    fail(ErrorCode::ConfigError, what + ": unknown utility family '" + name
                                     + "' (valid: crra, cara, hara, log, yaari, guarantee-crra)");
}

inline json family_json(const ParametricFamily& fam)
{
    return std::visit(
        [](const auto& f) -> json {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, CrraFamily>)
                return {{"family", "crra"}, {"rho", f.rho}, {"scale", f.scale}};
            else if constexpr (std::is_same_v<T, CaraFamily>)
                return {{"family", "cara"}, {"gamma", f.gamma}};
            else if constexpr (std::is_same_v<T, HaraFamily>)
                return {{"family", "hara"}, {"a", f.a}, {"b", f.b}, {"gamma", f.gamma}};
            else if constexpr (std::is_same_v<T, LogFamily>)
                return {{"family", "log"}};
            else if constexpr (std::is_same_v<T, YaariFamily>)
                return {{"family", "yaari"}, {"c", f.c}, {"B", f.B}};
            else
                return {{"family", "guarantee-crra"}, {"G", f.G}, {"rho", f.rho}, {"scale", f.scale}};
        },
        fam);
}

inline double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

inline Payoff payoff_from_spec(const std::string& spec, const PricingKernel& k)
{
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    auto number = [&]() {
        if (arg.empty())
            fail(ErrorCode::ConfigError, "payoff '" + kind + "' needs a value, e.g. " + kind + ":1");
        return io::parse_number(arg, "--payoff");
    };
    if (kind == "constant") {
        const double v = number();
        return Payoff::of_kernel([v](double) { return v; });
    }
    if (kind == "digital") {
        const double c = number();
        return Payoff([c](const KernelState& s) { return s.xi <= c ? 1.0 : 0.0; }, std::nullopt, {k.law().cdf(c)});
    }
    if (kind == "stock" || kind == "call" || kind == "put") {
        if (!k.bs())
            fail(ErrorCode::ConfigError, "payoff '" + kind + "' needs a Black-Scholes market");
        const double strike = kind == "stock" ? 0.0 : number();
        if (kind == "stock")
            return Payoff::of_kernel([k](double xi) { return k.stock_from_kernel(xi); });
        if (kind == "call")
            return Payoff::of_kernel([k, strike](double xi) { return std::max(k.stock_from_kernel(xi) - strike, 0.0); });
        return Payoff::of_kernel([k, strike](double xi) { return std::max(strike - k.stock_from_kernel(xi), 0.0); });
    }
    if (kind == "csv") {
        if (arg.empty())
            fail(ErrorCode::ConfigError, "payoff 'csv' needs a path, e.g. csv:payoff.csv");
        return io::payoff_from_csv(arg);
    }
    fail(ErrorCode::ConfigError, "unknown payoff '" + kind + "' (valid: constant:V, stock, call:K, put:K, digital:C, csv:PATH)");
}

inline io::Table payoff_table(const Payoff& x, const PricingKernel& k, std::size_t n, double lo, double hi)
{
    io::Table t{{"u", "xi", "payoff"}, {{}, {}, {}}};
    for (std::size_t i = 0; i < n; ++i) {
        const double u = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        const KernelState s = k.at(u);
        t.columns[0].push_back(u);
        t.columns[1].push_back(s.xi);
        t.columns[2].push_back(x(s));
    }
    return t;
}

// -- commands ----------------------------------------------------------------

inline void cmd_infer(Context& ctx, bool generalized)
{
    const PricingKernel k = ctx.kernel();
    const Distribution F = ctx.target_law();
    const bool irregular = !F.atoms().empty() || F.has_flats();
    if (!generalized && irregular) {
        ctx.warn("target law has atoms or flats; routed to generalized inference");
        generalized = true;
    }
    if (ctx.cfg.anchor)
        ctx.inputs["anchor"] = *ctx.cfg.anchor;
    const GeneralizedUtility g = generalized ? infer_generalized_utility(F, k, ctx.cfg.anchor)
                                             : GeneralizedUtility(infer_utility(F, k, ctx.cfg.anchor));
    const Grid grid = ctx.quantile_grid_for(F, 101, 0.05, 0.95);
    std::vector<double> xs(grid.begin(), grid.end());
    if (generalized) {
        // show the extension rules next to the support ends
        const double span = std::max(1e-3, xs.back() - xs.front());
        if (std::isfinite(g.lower()))
            xs.insert(xs.end(), {g.lower() - 0.1 * span, g.lower()});
        if (std::isfinite(g.upper()))
            xs.insert(xs.end(), {g.upper(), g.upper() + 0.1 * span});
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    }
    ctx.emit(io::curve_table(g, xs));
    ctx.outputs["generalized"] = generalized;
    ctx.outputs["domain"] = {extended(g.lower()), extended(g.upper())};
    ctx.outputs["anchor"] = ctx.cfg.anchor.value_or(F.impl().quantile(0.5));

    if (!ctx.cfg.fit.empty()) {
        if (generalized)
            fail(ErrorCode::ConfigError, "--fit needs a continuous target");
        auto params = ctx.cfg.fit_params;
        const UtilityCurve& u = g.core();
        // unspecified exponents default to the median of the inferred profile
        if (ctx.cfg.fit == "crra" && !params.count("rho")) {
            std::vector<double> v;
            for (double x : grid)
                v.push_back(rra(F, k, x));
            params["rho"] = median(v);
        }
        if (ctx.cfg.fit == "cara" && !params.count("gamma")) {
            std::vector<double> v;
            for (double x : grid)
                v.push_back(ara(F, k, x));
            params["gamma"] = median(v);
        }
        const ParametricFamily fam = family_from(ctx.cfg.fit, params, "--fit");
        const AffineFit fit = affine_fit(u, fam, grid);
        ctx.outputs["fit"] = {{"family", family_json(fam)}, {"alpha", fit.alpha}, {"beta", fit.beta}, {"residual", fit.residual}};
    }
}

inline void cmd_price(Context& ctx)
{
    const PricingKernel k = ctx.kernel();
    if (!ctx.cfg.payoff.empty()) {
        ctx.inputs["payoff"] = ctx.cfg.payoff;
        ctx.outputs["price"] = cost(payoff_from_spec(ctx.cfg.payoff, k), k, ctx.cfg.tol);
    }
    if (!ctx.cfg.target.empty() || !ctx.cfg.target_file.empty() || !ctx.cfg.empirical.empty())
        ctx.outputs["distributional_price"] = distributional_price(ctx.target_law(), k, ctx.cfg.tol);
    if (ctx.outputs.empty())
        fail(ErrorCode::ConfigError, "price needs --payoff or a target law");
}

inline void cmd_efficient(Context& ctx)
{
    const PricingKernel k = ctx.kernel();
    const Distribution F = ctx.target_law();
    const Payoff x = efficient_payoff(F, k);
    const std::size_t n = ctx.cfg.grid_size.value_or(1001);
    const double lo = ctx.cfg.p_lo.value_or(0.001), hi = ctx.cfg.p_hi.value_or(0.999);
    if (n < 2 || !(lo > 0.0 && lo < hi && hi < 1.0))
        fail(ErrorCode::ConfigError, "grid needs size >= 2 and 0 < p-lo < p-hi < 1");
    ctx.emit(payoff_table(x, k, n, lo, hi));
    ctx.outputs["distributional_price"] = distributional_price(F, k, ctx.cfg.tol);
}

inline void cmd_audit(Context& ctx)
{
    const PricingKernel k = ctx.kernel();
    if (ctx.cfg.payoff.empty())
        fail(ErrorCode::ConfigError, "audit needs --payoff");
    ctx.inputs["payoff"] = ctx.cfg.payoff;
    Payoff x = payoff_from_spec(ctx.cfg.payoff, k);
    if (!ctx.cfg.target.empty() || !ctx.cfg.target_file.empty() || !ctx.cfg.empirical.empty()) {
        const Distribution F = ctx.target_law();
        const Payoff base = x;
        x = Payoff([base](const KernelState& s) { return base(s); }, F, base.u_breaks());
    }
    const EfficiencyReport rep = audit(x, k, ctx.cfg.tol);
    ctx.outputs["cost"] = rep.cost;
    ctx.outputs["distributional_price"] = rep.distributional_price;
    ctx.outputs["excess_cost"] = rep.excess_cost;
    ctx.outputs["is_antimonotone"] = rep.is_antimonotone;
    ctx.outputs["is_efficient"] = rep.is_efficient;
}

inline void cmd_optimal(Context& ctx)
{
    const PricingKernel k = ctx.kernel();
    if (!ctx.cfg.budget)
        fail(ErrorCode::ConfigError, "optimal-payoff needs --budget");
    const double budget = *ctx.cfg.budget;
    ctx.inputs["budget"] = budget;
    std::optional<UtilityCurve> u;
    if (!ctx.cfg.utility_csv.empty()) {
        ctx.inputs["utility"] = {{"csv", ctx.cfg.utility_csv}};
        u = io::utility_from_csv(ctx.cfg.utility_csv);
    } else {
        if (ctx.cfg.utility.empty())
            fail(ErrorCode::ConfigError, "optimal-payoff needs --utility or --utility-csv");
        auto params = ctx.cfg.utility_params;
        if (ctx.cfg.utility == "yaari" && !params.count("B")) {
            const YaariSetup y = yaari_setup(k, param(params, "c", "--utility yaari"), budget);
            params["B"] = y.B;
            ctx.outputs["yaari_B"] = y.B;
            if (k.bs()) {
                const BsParams& p = *k.bs();
                const double th = p.theta();
                const double d = (std::log(y.c) + p.r * p.T - 0.5 * th * th * p.T) / (std::abs(th) * std::sqrt(p.T));
                const double product_form = budget * std::exp(p.r * p.T) * normal_cdf(d);
                ctx.warn("B derived from the budget is " + io::fmt(y.B) + "; the product form X0*exp(rT)*Phi(d) gives "
                         + io::fmt(product_form) + ", which does not meet the budget");
            }
        }
        const ParametricFamily fam = family_from(ctx.cfg.utility, params, "--utility");
        ctx.inputs["utility"] = family_json(fam);
        u = make_utility(fam);
    }
    const OptimalPayoff op = optimal_payoff(*u, k, budget, ctx.cfg.tol);
    ctx.outputs["lambda"] = op.lambda;
    ctx.outputs["cost"] = op.cost;
    const std::size_t n = ctx.cfg.grid_size.value_or(1001);
    const double lo = ctx.cfg.p_lo.value_or(0.001), hi = ctx.cfg.p_hi.value_or(0.999);
    if (n < 2 || !(lo > 0.0 && lo < hi && hi < 1.0))
        fail(ErrorCode::ConfigError, "grid needs size >= 2 and 0 < p-lo < p-hi < 1");
    ctx.emit(payoff_table(op.payoff, k, n, lo, hi));
}

inline void cmd_risk(Context& ctx)
{
    const PricingKernel k = ctx.kernel();
    const Distribution F = ctx.target_law();
    const Grid grid = ctx.quantile_grid_for(F, 201, 0.005, 0.995);
    const RiskAversionProfile prof = risk_aversion_profile(F, k, grid);
    ctx.emit(io::Table{{"x", "p", "ara", "rra"}, {prof.x, prof.p, prof.ara, prof.rra}});
    ctx.outputs["ara_min"] = *std::min_element(prof.ara.begin(), prof.ara.end());
    ctx.outputs["ara_max"] = *std::max_element(prof.ara.begin(), prof.ara.end());
}

inline void cmd_dara(Context& ctx)
{
    const PricingKernel k = ctx.kernel();
    const Distribution F = ctx.target_law();
    const Grid grid = ctx.quantile_grid_for(F, 201, 0.005, 0.995);
    const std::string& crit = ctx.cfg.criterion;
    if (crit != "all" && crit != "bs" && crit != "general" && crit != "hazard")
        fail(ErrorCode::ConfigError, "--criterion must be one of all, bs, general, hazard");
    ctx.inputs["criterion"] = crit;
    std::optional<DaraVerdict> main;
    if ((crit == "all" || crit == "bs") && k.bs()) {
        const DaraVerdict v = dara_bs(F, grid);
        ctx.outputs["bs"] = verdict_json(v);
        main = v;
    }
    if (crit == "all" || crit == "general") {
        const DaraVerdict v = dara_kernel(F, k, grid);
        ctx.outputs["general"] = verdict_json(v);
        if (!main)
            main = v;
    }
    if (crit == "all" || crit == "hazard") {
        const DaraVerdict v = dara_hazard_sufficient(F, grid);
        ctx.outputs["hazard"] = verdict_json(v);
        if (!main)
            main = v;
    }
    if (!main)
        fail(ErrorCode::ConfigError, "criterion 'bs' needs a Black-Scholes market");
    ctx.outputs["verdict"] = verdict_json(*main);
    ctx.outputs["is_dara"] = main->is_dara;
}

inline std::string suffixed(const std::string& path, const std::string& tag)
{
    const auto dot = path.find_last_of('.');
    const auto slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return path + "." + tag;
    return path.substr(0, dot) + "." + tag + path.substr(dot);
}

inline void cmd_discrete(Context& ctx)
{
    if (ctx.cfg.discrete_path.empty())
        fail(ErrorCode::ConfigError, "rationalize-discrete needs --discrete FILE");
    const io::DiscreteSpec spec = io::discrete_from_json(io::read_json(ctx.cfg.discrete_path), ctx.cfg.discrete_path);
    ctx.inputs["discrete"] = ctx.cfg.discrete_path;
    ctx.inputs["trials"] = ctx.cfg.trials;
    ctx.inputs["seed"] = ctx.cfg.seed;
    const std::string& which = ctx.cfg.construction;
    if (which != "both" && which != "paper-step" && which != "peleg-yaari")
        fail(ErrorCode::ConfigError, "--construction must be one of both, paper-step, peleg-yaari");
    ctx.inputs["construction"] = which;

    if (spec.market.is_equiprobable() && spec.market.size() <= 9) {
        const auto chk = check_all_permutations(spec.market, spec.xstar);
        ctx.outputs["rearrangement"] = {{"antimonotone_cost", chk.antimonotone_cost},
                                        {"min_cost", chk.min_cost},
                                        {"permutations", chk.permutations},
                                        {"antimonotone_is_minimal", chk.antimonotone_is_minimal}};
    }
    bool all_ok = true;
    for (const PiecewiseKind kind : {PiecewiseKind::paper_step, PiecewiseKind::peleg_yaari}) {
        const std::string name = to_string(kind);
        if (which != "both" && which != name)
            continue;
        const PiecewiseUtility u = kind == PiecewiseKind::paper_step ? paper_step_utility(spec.market, spec.xstar)
                                                                      : peleg_yaari_utility(spec.market, spec.xstar);
        io::Table t{{"x", "value", "left_slope", "right_slope"}, {{}, {}, {}, {}}};
        for (double b : u.breakpoints()) {
            t.columns[0].push_back(b);
            t.columns[1].push_back(u.value(b));
            t.columns[2].push_back(u.left_derivative(b));
            t.columns[3].push_back(u.right_derivative(b));
        }
        if (!ctx.cfg.out.empty())
            ctx.emit(t, which == "both" ? suffixed(ctx.cfg.out, name) : ctx.cfg.out);
        const OptimalityReport rep = verify_optimality(spec.market, u, spec.xstar, ctx.cfg.trials, ctx.cfg.seed);
        json viol = json::array();
        for (const auto& v : rep.pathwise_violations)
            viol.push_back({{"state", v.state}, {"z", v.z}, {"gap", v.gap}});
        ctx.outputs[name] = {{"ok", rep.ok},
                             {"pathwise_violations", viol},
                             {"pathwise_points", rep.pathwise_points},
                             {"trials", rep.trials},
                             {"random_violations", rep.random_violations},
                             {"worst_random_gap", rep.worst_random_gap},
                             {"expected_utility", rep.expected_utility},
                             {"budget", rep.budget}};
        all_ok = all_ok && rep.ok;
    }
    ctx.outputs["ok"] = all_ok;
}

inline json wrap(const std::string& command, Context& ctx)
{
    return {{"schema_version", io::kSchemaVersion},
            {"status", "ok"},
            {"command", command},
            {"inputs", ctx.inputs},
            {"inputs_digest", fnv1a_hex(ctx.inputs.dump())},
            {"outputs", ctx.outputs},
            {"files", ctx.files},
            {"warnings", ctx.warnings}};
}

inline Report error_report(const std::string& command, const Error& e)
{
    json body = {{"schema_version", io::kSchemaVersion},
                 {"status", "error"},
                 {"command", command},
                 {"error", {{"code", std::string(to_string(e.code()))}, {"message", e.detail()}}}};
    return {body, e.code() == ErrorCode::ConfigError ? 1 : 2};
}

} // namespace detail

/// Schema check of a market, target or discrete-market file; no computation.
inline Report validate(const std::string& path, const std::string& kind = "auto")
{
    try {
        const json j = io::read_json(path);
        std::string k = kind;
        if (k == "auto") {
            if (j.is_object() && j.contains("family"))
                k = "target";
            else if (j.is_object() && j.contains("xstar"))
                k = "discrete";
            else
                k = "market";
        }
        if (k == "target")
            io::detail::as_config(path, [&] { return make(io::named_law_from_json(j, path)); });
        else if (k == "discrete")
            io::discrete_from_json(j, path);
        else if (k == "market")
            io::market_from_json(j, path);
        else
            fail(ErrorCode::ConfigError, "unknown kind '" + kind + "' (valid: auto, market, target, discrete)");
        json body = {{"schema_version", io::kSchemaVersion},
                     {"status", "ok"},
                     {"command", "validate"},
                     {"inputs", {{"path", path}, {"kind", k}}},
                     {"outputs", {{"valid", true}}},
                     {"files", json::array()},
                     {"warnings", json::array()}};
        return {body, 0};
    } catch (const Error& e) {
        return detail::error_report("validate", e);
    }
}

/// Dispatch one command. Engine errors come back as an error report with a
/// nonzero exit code instead of propagating.
inline Report run(const RunConfig& cfg)
{
    if (cfg.command == "validate")
        return validate(cfg.validate_path, cfg.validate_kind);
    detail::Context ctx{cfg};
    try {
        if (cfg.format != "csv" && cfg.format != "json")
            fail(ErrorCode::ConfigError, "--format must be csv or json");
        if (cfg.command == "infer-utility")
            detail::cmd_infer(ctx, false);
        else if (cfg.command == "infer-generalized")
            detail::cmd_infer(ctx, true);
        else if (cfg.command == "price")
            detail::cmd_price(ctx);
        else if (cfg.command == "efficient-payoff")
            detail::cmd_efficient(ctx);
        else if (cfg.command == "audit")
            detail::cmd_audit(ctx);
        else if (cfg.command == "optimal-payoff")
            detail::cmd_optimal(ctx);
        else if (cfg.command == "risk-aversion")
            detail::cmd_risk(ctx);
        else if (cfg.command == "dara-test")
            detail::cmd_dara(ctx);
        else if (cfg.command == "rationalize-discrete")
            detail::cmd_discrete(ctx);
        else
            fail(ErrorCode::ConfigError, "unknown command '" + cfg.command + "'");
        Report rep{detail::wrap(cfg.command, ctx), 0};
        if (!cfg.report.empty())
            io::write_file(cfg.report, rep.body.dump(2) + "\n");
        return rep;
    } catch (const Error& e) {
        return detail::error_report(cfg.command, e);
    }
}

/// Build a RunConfig from argv. Usage errors raise ConfigError; --help
/// prints usage and returns an empty command.
inline RunConfig parse_args(int argc, const char* const* argv)
{
    RunConfig cfg;
    CLI::App app{"Implied utilities, cost-efficient payoffs and risk aversion in complete markets", "utilityforge"};
    app.require_subcommand(1);
    app.add_option("--seed", cfg.seed, "seed for randomized checks")->capture_default_str();

    auto add_market = [&](CLI::App* sub) {
        sub->add_option("--market", cfg.market_path, "market JSON (Black-Scholes or custom kernel)");
        sub->add_option("--mu", cfg.mu, "stock drift");
        sub->add_option("--sigma", cfg.sigma, "stock volatility");
        sub->add_option("--r", cfg.r, "risk-free rate");
        sub->add_option("--T", cfg.T, "horizon in years");
        sub->add_option("--S0", cfg.S0, "initial stock price");
    };
    auto add_target = [&](CLI::App* sub) {
        sub->add_option("--target", cfg.target, "target family: normal, lognormal, exponential, pareto, uniform, pointmass, two-point");
        for (const char* p : {"M", "Sigma", "lambda", "m", "alpha", "lo", "hi", "k", "low", "high", "p_low"})
            sub->add_option_function<double>(std::string("--") + p, [&cfg, p](double v) { cfg.target_params[p] = v; },
                                             std::string("target parameter ") + p);
        sub->add_option("--target-file", cfg.target_file, "target law JSON {family, params}");
        sub->add_option("--empirical", cfg.empirical, "target cdf CSV with columns x,F");
    };
    auto add_grid = [&](CLI::App* sub) {
        sub->add_option("--grid-size", cfg.grid_size, "number of grid points");
        sub->add_option("--p-lo", cfg.p_lo, "lowest quantile level");
        sub->add_option("--p-hi", cfg.p_hi, "highest quantile level");
    };
    auto add_output = [&](CLI::App* sub) {
        sub->add_option("--out", cfg.out, "data file to write");
        sub->add_option("--format", cfg.format, "csv or json")->capture_default_str();
        sub->add_option("--report", cfg.report, "also write the JSON report here");
        sub->add_option("--seed", cfg.seed, "seed for randomized checks");
    };
    auto add_params = [&](CLI::App* sub, std::map<std::string, double>& into, std::initializer_list<const char*> names,
                          const std::string& prefix) {
        for (const char* p : names)
            sub->add_option_function<double>(std::string("--") + prefix + p, [&into, p](double v) { into[p] = v; },
                                             std::string("utility parameter ") + p);
    };

    for (const char* name : {"infer-utility", "infer-generalized"}) {
        auto* sub = app.add_subcommand(name, std::string(name) == "infer-utility" ? "implied utility of a continuous target"
                                                                                    : "generalized implied utility of any target");
        add_market(sub);
        add_target(sub);
        add_grid(sub);
        add_output(sub);
        sub->add_option("--anchor", cfg.anchor, "anchor c with U(c) = 0 (default: median of the target)");
        sub->add_option("--fit", cfg.fit, "compare with a family: crra, cara, log, hara");
        add_params(sub, cfg.fit_params, {"rho", "gamma", "hara-a", "hara-b", "scale"}, "fit-");
        sub->callback([&cfg, name] { cfg.command = name; });
    }
    {
        auto* sub = app.add_subcommand("price", "price of a payoff, or distributional price of a target");
        add_market(sub);
        add_target(sub);
        add_output(sub);
        sub->add_option("--payoff", cfg.payoff, "constant:V, stock, call:K, put:K, digital:C or csv:PATH");
        sub->callback([&cfg] { cfg.command = "price"; });
    }
    {
        auto* sub = app.add_subcommand("efficient-payoff", "cheapest payoff with the target law");
        add_market(sub);
        add_target(sub);
        add_grid(sub);
        add_output(sub);
        sub->callback([&cfg] { cfg.command = "efficient-payoff"; });
    }
    {
        auto* sub = app.add_subcommand("audit", "cost-efficiency audit of a payoff");
        add_market(sub);
        add_target(sub);
        add_output(sub);
        sub->add_option("--payoff", cfg.payoff, "constant:V, stock, call:K, put:K, digital:C or csv:PATH")->required();
        sub->callback([&cfg] { cfg.command = "audit"; });
    }
    {
        auto* sub = app.add_subcommand("optimal-payoff", "payoff maximizing expected utility under a budget");
        add_market(sub);
        add_grid(sub);
        add_output(sub);
        sub->add_option("--utility", cfg.utility, "crra, cara, hara, log, yaari, guarantee-crra");
        add_params(sub, cfg.utility_params, {"rho", "gamma", "hara-a", "hara-b", "c", "B", "G", "scale"}, "");
        sub->add_option("--utility-csv", cfg.utility_csv, "tabulated utility with columns x,value,marginal");
        sub->add_option("--budget", cfg.budget, "initial wealth X0");
        sub->callback([&cfg] { cfg.command = "optimal-payoff"; });
    }
    {
        auto* sub = app.add_subcommand("risk-aversion", "absolute and relative risk aversion profile");
        add_market(sub);
        add_target(sub);
        add_grid(sub);
        add_output(sub);
        sub->callback([&cfg] { cfg.command = "risk-aversion"; });
    }
    {
        auto* sub = app.add_subcommand("dara-test", "decreasing absolute risk aversion verdicts");
        add_market(sub);
        add_target(sub);
        add_grid(sub);
        add_output(sub);
        sub->add_option("--criterion", cfg.criterion, "all, bs, general or hazard")->capture_default_str();
        sub->callback([&cfg] { cfg.command = "dara-test"; });
    }
    {
        auto* sub = app.add_subcommand("rationalize-discrete", "utilities rationalizing a discrete optimum");
        add_output(sub);
        sub->add_option("--discrete", cfg.discrete_path, "market JSON {N, xi, probs, xstar}")->required();
        sub->add_option("--construction", cfg.construction, "both, paper-step or peleg-yaari")->capture_default_str();
        sub->add_option("--trials", cfg.trials, "random challengers per construction")->capture_default_str();
        sub->callback([&cfg] { cfg.command = "rationalize-discrete"; });
    }
    {
        auto* sub = app.add_subcommand("validate", "schema check of a configuration file");
        sub->add_option("path", cfg.validate_path, "file to check")->required();
        sub->add_option("--kind", cfg.validate_kind, "auto, market, target or discrete")->capture_default_str();
        sub->callback([&cfg] { cfg.command = "validate"; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        cfg.command.clear();
        return cfg;
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        if (msg.empty())
            msg = CLI::FailureMessage::simple(&app, e);
        fail(ErrorCode::ConfigError, msg);
    }
    cfg.tol = detail::env_tolerance();
    return cfg;
}

/// Entry point shared by the executable and the tests.
inline int main(int argc, const char* const* argv, std::ostream& out = std::cout)
{
    RunConfig cfg;
    try {
        cfg = parse_args(argc, argv);
    } catch (const Error& e) {
        out << detail::error_report("", e).body.dump(2) << "\n";
        return 1;
    }
    if (cfg.command.empty())
        return 0;
    const Report rep = run(cfg);
    out << rep.body.dump(2) << "\n";
    return rep.exit_code;
}

} // namespace utilityforge::cli
