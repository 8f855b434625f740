#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "klv/cli.hpp"

using namespace klv;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "klv");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string source(const std::string& rel) { return (std::filesystem::path(KLV_SOURCE_DIR) / rel).string(); }

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("klv_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void expect_single_line(const std::string& err) {
    ASSERT_FALSE(err.empty());
    EXPECT_EQ(err.find('\n'), err.size() - 1) << err;
    EXPECT_EQ(err.rfind("error: ", 0), 0u) << err;
}

}  // namespace

TEST(FitSlope, ExactPowerLaw) {
    std::vector<std::pair<double, double>> pts;
    for (int k = 2; k <= 12; ++k) pts.emplace_back(k, 3.0 * std::pow(k, -2.0));
    const auto f = fit_slope(pts);
    EXPECT_NEAR(f.slope, -2.0, 1e-12);
    EXPECT_LT(f.standard_error, 1e-12);
}

TEST(FitSlope, ConstantErrorsGiveZero) {
    const auto f = fit_slope({{2, 0.1}, {4, 0.1}, {8, 0.1}});
    EXPECT_NEAR(f.slope, 0.0, 1e-14);
}

TEST(FitSlope, NoisyInverseLaw) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> noise(-0.05, 0.05);
    std::vector<std::pair<double, double>> pts;
    for (int k = 2; k <= 12; ++k) pts.emplace_back(k, (1.0 / k) * (1.0 + noise(rng)));
    const auto f = fit_slope(pts);
    EXPECT_GE(f.slope, -1.15);
    EXPECT_LE(f.slope, -0.85);
    EXPECT_GT(f.standard_error, 0.0);
}

TEST(FitSlope, NonPositiveErrorsDroppedWithWarning) {
    const auto f = fit_slope({{2, 0.25}, {3, 0.0}, {4, 0.0625}, {8, 1.0 / 64}});
    EXPECT_EQ(f.points, 3u);
    EXPECT_EQ(f.warnings.size(), 1u);
    EXPECT_NEAR(f.slope, -2.0, 1e-12);
    EXPECT_THROW(fit_slope({{2, 0.1}, {4, -1.0}, {8, 0.01}}), DomainError);
}

TEST(Cli, ValidateShippedDegree3) {
    const auto r = invoke({"validate-cubature", source("data/degree3_d2.json")});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("word,expected,computed,defect\n", 0), 0u);
    EXPECT_NE(r.out.find("result=PASS"), std::string::npos);
}

TEST(Cli, ValidateBuiltinDegree5AtSevenFails) {
    const auto r = invoke({"validate-cubature", "builtin:degree5_d1", "--degree", "7"});
    EXPECT_EQ(r.code, 1);
    expect_single_line(r.err);
    EXPECT_NE(r.err.find("at word ("), std::string::npos);
}

TEST(Cli, ValidateEmitsFormula) {
    const auto dir = scratch("emit");
    const auto r = invoke({"validate-cubature", "builtin:degree3(3)", "--emit", (dir / "q.json").string()});
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(validate(from_file((dir / "q.json").string()), 3).passed);
}

TEST(Cli, UsageErrors) {
    auto r = invoke({"frobnicate"});
    EXPECT_EQ(r.code, 2);
    expect_single_line(r.err);
    r = invoke({});
    EXPECT_EQ(r.code, 2);
    r = invoke({"solve"});
    EXPECT_EQ(r.code, 2);
    expect_single_line(r.err);
    r = invoke({"validate-cubature", "/nonexistent/q.json"});
    EXPECT_EQ(r.code, 2);
    expect_single_line(r.err);
}

TEST(Cli, BadConfigIsUsageError) {
    const auto dir = scratch("badcfg");
    std::ofstream(dir / "c.json") << R"json({"system": "gbm(0.05,0.3)", "partition": {"k_list": [4, 2]}})json";
    const auto r = invoke({"solve", "--config", (dir / "c.json").string()});
    EXPECT_EQ(r.code, 2);
    expect_single_line(r.err);
    EXPECT_NE(r.err.find("k_list"), std::string::npos);
    std::ofstream(dir / "t.json") << R"json({"system": "gbm(0.05,0.3)", "cubature": {"builtin": 3}})json";
    const auto t = invoke({"solve", "--config", (dir / "t.json").string()});
    EXPECT_EQ(t.code, 2);
    expect_single_line(t.err);
}

TEST(Cli, ExpectedSignatureJson) {
    const auto r = invoke({"expected-signature", "--dim", "1", "--degree", "4", "--horizon", "2"});
    ASSERT_EQ(r.code, 0);
    const auto t = tensor_from_json(nlohmann::json::parse(r.out));
    EXPECT_DOUBLE_EQ(t[(Word{1, 1})], 1.0);
    EXPECT_DOUBLE_EQ(t[(Word{0, 0})], 2.0);
}

TEST(Cli, SolveReportsDiagnostics) {
    const auto r = invoke({"solve", "--config", source("configs/gbm_degree3.json"), "--k", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["leaves_evaluated"], 16);
    EXPECT_EQ(j["partition"].size(), 5u);
    EXPECT_LT(j["abs_error"].get<double>(), 1e-3);
}

TEST(Cli, ConvergeOnGbmDegree3) {
    const auto dir = scratch("converge");
    const auto r = invoke({"converge", "--config", source("configs/gbm_degree3.json"), "--out", dir.string(),
                        "--expect-slope", "-1.25,-0.75"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream csv(r.out);
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "k,value,reference,abs_error");
    double prev = 1e300;
    int rows = 0;
    while (std::getline(csv, line)) {
        const double err = std::stod(line.substr(line.rfind(',') + 1));
        EXPECT_LT(err, prev);
        prev = err;
        ++rows;
    }
    EXPECT_EQ(rows, 6);
    EXPECT_EQ(slurp(dir / "converge.csv"), r.out);
    const auto summary = nlohmann::json::parse(slurp(dir / "converge.json"));
    EXPECT_EQ(summary["reference_source"], "closed_form");
    EXPECT_NEAR(summary["slope"].get<double>(), -1.0, 0.25);
}

TEST(Cli, ConvergeSlopeAssertionFails) {
    const auto r = invoke({"converge", "--config", source("configs/gbm_degree3.json"), "--expect-slope", "-3,-2"});
    EXPECT_EQ(r.code, 1);
    expect_single_line(r.err);
}

TEST(Cli, ConvergeIsByteIdenticalAcrossThreadCounts) {
    const auto a = invoke({"converge", "--config", source("configs/gbm_degree5.json"), "--threads", "1"});
    ASSERT_EQ(a.code, 0) << a.err;
    for (const char* t : {"4", "8"}) EXPECT_EQ(invoke({"converge", "--config", source("configs/gbm_degree5.json"), "--threads", t}).out, a.out);
}

TEST(Cli, ConvergeFallsBackToMonteCarloReference) {
    const auto dir = scratch("mcref");
    std::ofstream(dir / "c.json") << R"json({"system": "gbm(0.05,0.3)", "payoff": "softplus(1.0,20)", "x0": 1.0,
        "cubature": {"builtin": "degree3"}, "partition": {"gamma": 2, "k_list": [2, 3, 4]},
        "caps": {"mc_steps": 50, "mc_paths": 4000}})json";
    const auto r = invoke({"converge", "--config", (dir / "c.json").string(), "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto summary = nlohmann::json::parse(slurp(dir / "converge.json"));
    EXPECT_EQ(summary["reference_source"].get<std::string>().rfind("euler_mc", 0), 0u);
}

TEST(Cli, McReference) {
    const auto r = invoke({"mc-reference", "--config", source("configs/gbm_degree3.json"), "--steps", "50", "--paths",
                        "20000", "--seed", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_NEAR(j["mean"].get<double>(), j["closed_form"].get<double>(),
                4 * j["standard_error"].get<double>() + 3e-3);
}

TEST(Cli, SampledModeRuns) {
    const auto r = invoke({"solve", "--config", source("configs/ou_sampled.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["mode"], "sampled");
    EXPECT_NEAR(j["value"].get<double>(), j["reference"].get<double>(), 5 * j["standard_error"].get<double>() + 1e-3);
}

TEST(Cli, AffineSystemFromFile) {
    const auto r = invoke({"solve", "--config", source("configs/affine_2d.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(std::isfinite(nlohmann::json::parse(r.out)["value"].get<double>()));
}

TEST(Cli, LemmaGap) {
    const auto r = invoke({"lemma-gap", "--degree", "3", "--seed", "2"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("s,gap,bound\n", 0), 0u);
}
