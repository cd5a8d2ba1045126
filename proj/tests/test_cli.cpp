#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "utilityforge/cli.hpp"
#include "utilityforge/io.hpp"

using namespace utilityforge;
using nlohmann::json;

namespace {

const std::string kSamples = UF_SAMPLES_DIR;

struct Outcome {
    int code;
    json body;
};

Outcome run_cli(std::vector<std::string> args)
{
    std::vector<const char*> argv{"utilityforge"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out;
    const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out);
    return {code, json::parse(out.str())};
}

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "utilityforge_cli_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::vector<std::string> kMarket{"--market", kSamples + "/bs.json"};

std::vector<std::string> with_market(std::vector<std::string> a)
{
    a.insert(a.begin() + 1, kMarket.begin(), kMarket.end());
    return a;
}

} // namespace

TEST(Cli, DaraLognormal)
{
    const Outcome o = run_cli(with_market({"dara-test", "--target", "lognormal", "--M", "0", "--Sigma", "0.2"}));
    ASSERT_EQ(o.code, 0) << o.body.dump();
    EXPECT_EQ(o.body["status"], "ok");
    EXPECT_TRUE(o.body["outputs"]["is_dara"].get<bool>());
    EXPECT_TRUE(o.body["outputs"]["bs"]["is_dara"].get<bool>());
}

TEST(Cli, PriceConstant)
{
    const Outcome o = run_cli(with_market({"price", "--payoff", "constant:5"}));
    ASSERT_EQ(o.code, 0) << o.body.dump();
    EXPECT_NEAR(o.body["outputs"]["price"].get<double>(), 5.0 * std::exp(-0.03), 1e-10);
}

TEST(Cli, InlineMarketFlags)
{
    const Outcome o = run_cli({"price", "--mu", "0.08", "--sigma", "0.2", "--r", "0.05", "--T", "2", "--payoff", "constant:1"});
    ASSERT_EQ(o.code, 0) << o.body.dump();
    EXPECT_NEAR(o.body["outputs"]["price"].get<double>(), std::exp(-0.1), 1e-10);
}

TEST(Cli, InferNormalFitsCara)
{
    const Outcome o = run_cli(with_market({"infer-utility", "--target", "normal", "--M", "1", "--Sigma", "0.3", "--fit", "cara"}));
    ASSERT_EQ(o.code, 0) << o.body.dump();
    EXPECT_LE(o.body["outputs"]["fit"]["residual"].get<double>(), 1e-6);
    EXPECT_FALSE(o.body["outputs"]["generalized"].get<bool>());
    EXPECT_EQ(o.body["outputs"]["rows"], 101);
    EXPECT_EQ(o.body["outputs"]["table"]["x"].size(), 101u);
    EXPECT_EQ(o.body["outputs"]["table"]["marginal"].size(), 101u);
}

TEST(Cli, InferPointMassRoutesToGeneralized)
{
    const Outcome o = run_cli(with_market({"infer-utility", "--target", "two-point", "--low", "0", "--high", "2", "--p_low", "0.4"}));
    ASSERT_EQ(o.code, 0) << o.body.dump();
    EXPECT_TRUE(o.body["outputs"]["generalized"].get<bool>());
    EXPECT_FALSE(o.body["warnings"].empty());
}

TEST(Cli, ValidateGoodAndBad)
{
    EXPECT_EQ(run_cli({"validate", kSamples + "/bs.json"}).code, 0);
    EXPECT_EQ(run_cli({"validate", kSamples + "/discrete_market.json"}).code, 0);
    EXPECT_EQ(run_cli({"validate", kSamples + "/lognormal_target.json"}).code, 0);

    const auto bad = scratch("bad_market.json");
    io::write_file(bad.string(), R"({"mu": 0.08, "sigma": -0.2, "r": 0.03, "T": 1})");
    const Outcome o = run_cli({"validate", bad.string()});
    EXPECT_EQ(o.code, 1);
    EXPECT_EQ(o.body["error"]["code"], "ConfigError");
    EXPECT_NE(o.body["error"]["message"].get<std::string>().find("sigma"), std::string::npos);

    const auto fam = scratch("bad_target.json");
    io::write_file(fam.string(), R"({"family": "gamma", "params": {"k": 2}})");
    const Outcome f = run_cli({"validate", fam.string()});
    EXPECT_EQ(f.code, 1);
    const std::string msg = f.body["error"]["message"];
    EXPECT_NE(msg.find("lognormal"), std::string::npos) << msg;
    EXPECT_NE(msg.find("pareto"), std::string::npos) << msg;
}

TEST(Cli, ExitCodes)
{
    EXPECT_EQ(run_cli({"price", "--bogus"}).code, 1);
    EXPECT_EQ(run_cli({"price"}).code, 1);
    // engine error: budget outside the attainable range
    const Outcome o = run_cli(with_market({"optimal-payoff", "--utility", "crra", "--rho", "2", "--budget", "-1"}));
    EXPECT_EQ(o.code, 2) << o.body.dump();
    EXPECT_EQ(o.body["error"]["code"], "BudgetOutOfRange");
}

TEST(Cli, CsvOutputIsDeterministic)
{
    const auto a = scratch("det_a.csv"), b = scratch("det_b.csv");
    for (const auto& p : {a, b}) {
        const Outcome o = run_cli(with_market({"infer-utility", "--target", "exponential", "--lambda", "1", "--out", p.string()}));
        ASSERT_EQ(o.code, 0) << o.body.dump();
    }
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_FALSE(slurp(a).empty());
}

TEST(Cli, CurveCsvRoundTrip)
{
    const auto p = scratch("curve.csv");
    const Outcome o = run_cli(with_market({"infer-utility", "--target", "lognormal", "--M", "0.05", "--Sigma", "0.2", "--out", p.string()}));
    ASSERT_EQ(o.code, 0) << o.body.dump();
    const io::Table t = io::read_csv(p.string());
    const UtilityCurve u = io::utility_from_csv(p.string());
    const PricingKernel k = bs_kernel({0.08, 0.2, 0.03, 1.0, 1.0});
    const UtilityCurve direct = infer_utility(lognormal(0.05, 0.2), k);
    const auto& xs = t.column("x");
    // the tabulated curve lives on the open interval between the end rows
    for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
        EXPECT_NEAR(u.marginal(xs[i]), direct.marginal(xs[i]), 1e-9 * direct.marginal(xs[i]));
        EXPECT_NEAR(u.value(xs[i]), direct.value(xs[i]), 1e-9);
    }
}

TEST(Cli, RationalizeDiscrete)
{
    const Outcome o = run_cli({"rationalize-discrete", "--discrete", kSamples + "/discrete_market.json", "--trials", "2000"});
    ASSERT_EQ(o.code, 0) << o.body.dump();
    EXPECT_TRUE(o.body["outputs"]["ok"].get<bool>());
    EXPECT_TRUE(o.body["outputs"]["paper-step"]["ok"].get<bool>());
    EXPECT_TRUE(o.body["outputs"]["peleg-yaari"]["ok"].get<bool>());
    EXPECT_TRUE(o.body["outputs"]["rearrangement"]["antimonotone_is_minimal"].get<bool>());
}

TEST(Cli, ReportFileMatchesStdout)
{
    const auto r = scratch("report.json");
    const Outcome o = run_cli(with_market({"price", "--payoff", "stock", "--report", r.string()}));
    ASSERT_EQ(o.code, 0) << o.body.dump();
    EXPECT_EQ(json::parse(slurp(r)), o.body);
    EXPECT_EQ(o.body["schema_version"], io::kSchemaVersion);
}

TEST(Cli, ExecutableRuns)
{
    const std::string cmd = std::string("\"") + UF_CLI_PATH + "\" price --market \"" + kSamples + "/bs.json\" --payoff constant:1 > " +
                            scratch("exe.json").string();
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    const json j = json::parse(slurp(scratch("exe.json")));
    EXPECT_NEAR(j["outputs"]["price"].get<double>(), std::exp(-0.03), 1e-10);
}
