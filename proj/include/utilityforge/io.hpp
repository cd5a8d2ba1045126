#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "utilityforge/distributions.hpp"
#include "utilityforge/efficiency.hpp"
#include "utilityforge/error.hpp"
#include "utilityforge/market.hpp"
#include "utilityforge/utility.hpp"

namespace utilityforge::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// 17 significant digits; infinities as +inf / -inf.
inline std::string fmt(double v)
{
    if (std::isinf(v))
        return v > 0 ? "+inf" : "-inf";
    if (std::isnan(v))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_number(const std::string& s, const std::string& where)
{
    if (s == "+inf" || s == "inf")
        return kInf;
    if (s == "-inf")
        return -kInf;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::ConfigError, where + ": not a number: '" + s + "'");
    }
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::ConfigError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json parse_json(const std::string& text, const std::string& source)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ConfigError, source + ": " + e.what());
    }
}

inline json read_json(const std::string& path) { return parse_json(read_file(path), path); }

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    [[nodiscard]] std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

    [[nodiscard]] const std::vector<double>& column(const std::string& name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return columns[i];
        fail(ErrorCode::ConfigError, "missing CSV column '" + name + "'");
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r'))
            cell.pop_back();
        std::size_t start = 0;
        while (start < cell.size() && cell[start] == ' ')
            ++start;
        out.push_back(cell.substr(start));
    }
    return out;
}

/// Comma-separated table with a header row; '#' starts a comment line.
inline Table parse_csv(const std::string& text, const std::string& source)
{
    Table t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        auto cells = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            t.columns.assign(t.header.size(), {});
            continue;
        }
        if (cells.size() != t.header.size())
            fail(ErrorCode::ConfigError, source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size())
                                             + " fields, got " + std::to_string(cells.size()));
        for (std::size_t i = 0; i < cells.size(); ++i)
            t.columns[i].push_back(parse_number(cells[i], source + ":" + std::to_string(lineno)));
    }
    if (t.header.empty())
        fail(ErrorCode::ConfigError, source + ": empty CSV");
    return t;
}

inline Table read_csv(const std::string& path) { return parse_csv(read_file(path), path); }

inline std::string to_csv(const Table& t)
{
    std::string out;
    for (std::size_t i = 0; i < t.header.size(); ++i)
        out += (i ? "," : "") + t.header[i];
    out += '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
        for (std::size_t i = 0; i < t.columns.size(); ++i)
            out += (i ? "," : "") + fmt(t.columns[i][r]);
        out += '\n';
    }
    return out;
}

inline void write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail(ErrorCode::ConfigError, "cannot write " + path);
    out << content;
}

// ---------------------------------------------------------------------------
// JSON schemas
// ---------------------------------------------------------------------------

namespace detail {

inline double number_field(const json& j, const std::string& key, const std::string& where)
{
    if (!j.contains(key))
        fail(ErrorCode::ConfigError, where + ": missing field '" + key + "'");
    const json& v = j.at(key);
    if (!v.is_number())
        fail(ErrorCode::ConfigError, where + ": field '" + key + "' must be a number");
    return v.get<double>();
}

inline std::vector<double> array_field(const json& j, const std::string& key, const std::string& where)
{
    if (!j.contains(key) || !j.at(key).is_array())
        fail(ErrorCode::ConfigError, where + ": field '" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const json& v : j.at(key)) {
        if (!v.is_number())
            fail(ErrorCode::ConfigError, where + ": field '" + key + "' must contain numbers only");
        out.push_back(v.get<double>());
    }
    return out;
}

inline std::string family_list()
{
    std::string s;
    for (auto name : kFamilyNames)
        s += (s.empty() ? "" : ", ") + std::string(name);
    return s;
}

// Re-raise parameter errors from the engine as configuration errors.
template <class F>
auto as_config(const std::string& where, F&& f)
{
    try {
        return f();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::InvalidParameter)
            fail(ErrorCode::ConfigError, where + ": " + e.detail());
        throw;
    }
}

} // namespace detail

/// {"family": name, "params": {...}}
inline NamedLaw named_law_from_json(const json& j, const std::string& where = "target")
{
    if (!j.is_object())
        fail(ErrorCode::ConfigError, where + ": expected an object");
    if (!j.contains("family") || !j.at("family").is_string())
        fail(ErrorCode::ConfigError, where + ": missing string field 'family' (valid families: " + detail::family_list() + ")");
    const std::string fam = j.at("family").get<std::string>();
    const json p = j.value("params", json::object());
    const std::string w = where + ".params";
    if (fam == "normal")
        return NormalLaw{detail::number_field(p, "M", w), detail::number_field(p, "Sigma", w)};
    if (fam == "lognormal")
        return LognormalLaw{detail::number_field(p, "M", w), detail::number_field(p, "Sigma", w)};
    if (fam == "exponential")
        return ExponentialLaw{detail::number_field(p, "lambda", w)};
    if (fam == "pareto")
        return ParetoLaw{detail::number_field(p, "m", w), detail::number_field(p, "alpha", w)};
    if (fam == "uniform")
        return UniformLaw{detail::number_field(p, "lo", w), detail::number_field(p, "hi", w)};
    if (fam == "pointmass")
        return PointMassLaw{detail::number_field(p, "k", w)};
    if (fam == "two-point")
        return TwoPointLaw{detail::number_field(p, "low", w), detail::number_field(p, "high", w),
                           detail::number_field(p, "p_low", w)};
    if (fam == "discrete") {
        const auto loc = detail::array_field(p, "locations", w);
        const auto mass = detail::array_field(p, "masses", w);
        if (loc.size() != mass.size())
            fail(ErrorCode::ConfigError, w + ": 'locations' and 'masses' differ in length");
        DiscreteLaw d;
        for (std::size_t i = 0; i < loc.size(); ++i)
            d.atoms.push_back({loc[i], mass[i]});
        return d;
    }
    if (fam == "empirical-grid")
        return EmpiricalGridLaw{detail::array_field(p, "x", w), detail::array_field(p, "F", w)};
    fail(ErrorCode::ConfigError, where + ": unknown family '" + fam + "' (valid families: " + detail::family_list() + ")");
}

inline json named_law_to_json(const NamedLaw& law)
{
    return std::visit(
        [](const auto& l) -> json {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, NormalLaw>)
                return {{"family", "normal"}, {"params", {{"M", l.M}, {"Sigma", l.Sigma}}}};
            else if constexpr (std::is_same_v<T, LognormalLaw>)
                return {{"family", "lognormal"}, {"params", {{"M", l.M}, {"Sigma", l.Sigma}}}};
            else if constexpr (std::is_same_v<T, ExponentialLaw>)
                return {{"family", "exponential"}, {"params", {{"lambda", l.lambda}}}};
            else if constexpr (std::is_same_v<T, ParetoLaw>)
                return {{"family", "pareto"}, {"params", {{"m", l.m}, {"alpha", l.alpha}}}};
            else if constexpr (std::is_same_v<T, UniformLaw>)
                return {{"family", "uniform"}, {"params", {{"lo", l.lo}, {"hi", l.hi}}}};
            else if constexpr (std::is_same_v<T, PointMassLaw>)
                return {{"family", "pointmass"}, {"params", {{"k", l.k}}}};
            else if constexpr (std::is_same_v<T, TwoPointLaw>)
                return {{"family", "two-point"}, {"params", {{"low", l.low}, {"high", l.high}, {"p_low", l.p_low}}}};
            else if constexpr (std::is_same_v<T, DiscreteLaw>) {
                json loc = json::array(), mass = json::array();
                for (const Atom& a : l.atoms) {
                    loc.push_back(a.location);
                    mass.push_back(a.mass);
                }
                return {{"family", "discrete"}, {"params", {{"locations", loc}, {"masses", mass}}}};
            } else
                return {{"family", "empirical-grid"}, {"params", {{"x", l.x}, {"F", l.F}}}};
        },
        law);
}

/// Market file: Black-Scholes {"mu","sigma","r","T","S0"} or a custom
/// kernel {"kernel": {"family": ..., "params": ...}}.
struct MarketSpec {
    std::optional<BsParams> bs;
    std::optional<NamedLaw> kernel_law;

    [[nodiscard]] PricingKernel kernel() const
    {
        if (bs)
            return bs_kernel(*bs);
        return custom_kernel(make(*kernel_law));
    }
};

inline MarketSpec market_from_json(const json& j, const std::string& where = "market")
{
    if (!j.is_object())
        fail(ErrorCode::ConfigError, where + ": expected an object");
    MarketSpec m;
    if (j.contains("kernel")) {
        m.kernel_law = named_law_from_json(j.at("kernel"), where + ".kernel");
        detail::as_config(where + ".kernel", [&] { return custom_kernel(make(*m.kernel_law)); });
        return m;
    }
    BsParams p;
    p.mu = detail::number_field(j, "mu", where);
    p.sigma = detail::number_field(j, "sigma", where);
    p.r = detail::number_field(j, "r", where);
    p.T = detail::number_field(j, "T", where);
    if (j.contains("S0"))
        p.S0 = detail::number_field(j, "S0", where);
    if (!(p.sigma > 0.0))
        fail(ErrorCode::ConfigError, where + ": field 'sigma' must be positive");
    if (!(p.T > 0.0))
        fail(ErrorCode::ConfigError, where + ": field 'T' must be positive");
    if (!(p.S0 > 0.0))
        fail(ErrorCode::ConfigError, where + ": field 'S0' must be positive");
    detail::as_config(where, [&] {
        p.validate();
        return 0;
    });
    m.bs = p;
    return m;
}

inline json market_to_json(const MarketSpec& m)
{
    if (m.bs)
        return {{"mu", m.bs->mu}, {"sigma", m.bs->sigma}, {"r", m.bs->r}, {"T", m.bs->T}, {"S0", m.bs->S0}};
    return {{"kernel", named_law_to_json(*m.kernel_law)}};
}

/// Discrete market file {N, xi[], probs[], xstar[]}; probs optional.
struct DiscreteSpec {
    DiscreteMarket market;
    Allocation xstar;
};

inline DiscreteSpec discrete_from_json(const json& j, const std::string& where = "discrete")
{
    if (!j.is_object())
        fail(ErrorCode::ConfigError, where + ": expected an object");
    const auto xi = detail::array_field(j, "xi", where);
    const auto xstar = detail::array_field(j, "xstar", where);
    std::vector<double> probs;
    if (j.contains("probs"))
        probs = detail::array_field(j, "probs", where);
    else
        probs.assign(xi.size(), xi.empty() ? 0.0 : 1.0 / static_cast<double>(xi.size()));
    if (j.contains("N")) {
        if (!j.at("N").is_number_integer() || j.at("N").get<long long>() < 1)
            fail(ErrorCode::ConfigError, where + ": field 'N' must be a positive integer");
        if (static_cast<std::size_t>(j.at("N").get<long long>()) != xi.size())
            fail(ErrorCode::ConfigError, where + ": field 'N' does not match the length of 'xi'");
    }
    if (xstar.size() != xi.size())
        fail(ErrorCode::ConfigError, where + ": field 'xstar' does not match the length of 'xi'");
    return detail::as_config(where, [&] { return DiscreteSpec{DiscreteMarket(xi, probs), Allocation{xstar}}; });
}

// ---------------------------------------------------------------------------
// Tabulated data
// ---------------------------------------------------------------------------

/// Empirical law from a CSV with columns x,F.
inline Distribution empirical_from_csv(const std::string& path)
{
    const Table t = read_csv(path);
    return detail::as_config(path, [&] { return make(EmpiricalGridLaw{t.column("x"), t.column("F")}); });
}

/// Payoff tabulated as (xi, value), linear in between and flat outside.
inline Payoff payoff_from_table(std::vector<double> xi, std::vector<double> val)
{
    if (xi.size() != val.size() || xi.size() < 2)
        fail(ErrorCode::ConfigError, "payoff table needs matching xi and value columns with at least 2 rows");
    for (std::size_t i = 1; i < xi.size(); ++i)
        if (!(xi[i - 1] < xi[i]))
            fail(ErrorCode::ConfigError, "payoff table: xi must be strictly increasing");
    auto f = [xi = std::move(xi), val = std::move(val)](double x) {
        if (x <= xi.front())
            return val.front();
        if (x >= xi.back())
            return val.back();
        const auto it = std::upper_bound(xi.begin(), xi.end(), x);
        const std::size_t j = static_cast<std::size_t>(it - xi.begin());
        const double w = (x - xi[j - 1]) / (xi[j] - xi[j - 1]);
        return val[j - 1] + w * (val[j] - val[j - 1]);
    };
    return Payoff::of_kernel(std::move(f));
}

inline Payoff payoff_from_csv(const std::string& path)
{
    const Table t = read_csv(path);
    return payoff_from_table(t.column("xi"), t.column("value"));
}

namespace curves {

/// Utility tabulated at nodes (x, value, marginal): the marginal is linear
/// between nodes and the value integrates it from the left node.
class Tabulated final : public CurveImpl {
public:
    Tabulated(std::vector<double> x, std::vector<double> v, std::vector<double> m)
        : x_(std::move(x)), v_(std::move(v)), m_(std::move(m))
    {}
    std::string name() const override { return "tabulated"; }
    double lower() const override { return x_.front(); }
    double upper() const override { return x_.back(); }
    double reference() const override { return x_[x_.size() / 2]; }
    double value(double x) const override
    {
        const std::size_t j = seg(x);
        const double h = x - x_[j];
        const double slope = (m_[j + 1] - m_[j]) / (x_[j + 1] - x_[j]);
        return v_[j] + m_[j] * h + 0.5 * slope * h * h;
    }
    double marginal(double x) const override
    {
        const std::size_t j = seg(x);
        const double w = (x - x_[j]) / (x_[j + 1] - x_[j]);
        return m_[j] + w * (m_[j + 1] - m_[j]);
    }
    double marginal_at_lower() const override { return m_.front(); }
    double marginal_at_upper() const override { return m_.back(); }
    double value_at_lower() const override { return v_.front(); }
    double value_at_upper() const override { return v_.back(); }
    bool smooth_marginal() const override { return false; }

private:
    std::size_t seg(double x) const
    {
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t j = static_cast<std::size_t>(it - x_.begin());
        j = std::clamp<std::size_t>(j, 1, x_.size() - 1);
        return j - 1;
    }

    std::vector<double> x_, v_, m_;
};

} // namespace curves

/// Utility curve re-read from an emitted (x, value, marginal) CSV.
inline UtilityCurve utility_from_csv(const std::string& path)
{
    const Table t = read_csv(path);
    std::vector<double> x = t.column("x"), v = t.column("value"), m = t.column("marginal");
    if (x.size() < 2)
        fail(ErrorCode::ConfigError, path + ": utility table needs at least 2 rows");
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(v[i]) || !std::isfinite(m[i]))
            fail(ErrorCode::ConfigError, path + ": utility table rows must be finite");
        if (i > 0 && !(x[i - 1] < x[i]))
            fail(ErrorCode::ConfigError, path + ": x must be strictly increasing");
        if (i > 0 && m[i] > m[i - 1])
            fail(ErrorCode::ConfigError, path + ": marginal must be non-increasing");
    }
    return UtilityCurve(std::make_shared<curves::Tabulated>(std::move(x), std::move(v), std::move(m)));
}

/// (x, value, marginal) rows; generalized curves may contain infinities.
inline Table curve_table(const GeneralizedUtility& u, const std::vector<double>& xs)
{
    Table t{{"x", "value", "marginal"}, {{}, {}, {}}};
    for (double x : xs) {
        t.columns[0].push_back(x);
        t.columns[1].push_back(u.value(x).to_double());
        t.columns[2].push_back(u.marginal(x).to_double());
    }
    return t;
}

} // namespace utilityforge::io
