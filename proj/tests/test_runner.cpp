#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>

#include "fraclab/runner.hpp"

using namespace fraclab;

namespace {

RunConfig small_interval(std::vector<std::string> checks) {
    RunConfig c;
    c.domain = DomainSpec::interval(1.0, 17);
    c.dirichlet = {"left"};
    c.s = {0.75};
    c.p = 4.0;
    c.checks = std::move(checks);
    c.ladder = {{33, 16}, {65, 24}};
    c.random_bumps = 5;
    return c;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(ParseConfig, KappaOnlyAtOneHalf) {
    const auto cfg = parse_config(R"({
        "domain": {"type": "interval"},
        "s": 0.5,
        "checks": ["kappa"],
        "ladder": [{"n": 17}]
    })");
    const RunReport rep = run(cfg);
    ASSERT_EQ(rep.records.size(), 1u);
    EXPECT_NEAR(rep.records[0].empirical_constant, 1.0, 1e-12);
    EXPECT_TRUE(rep.records[0].pass);
    EXPECT_EQ(rep.exit_code(), 0);
}

TEST(ParseConfig, RejectsSmallExponentNamingGamma) {
    try {
        parse_config(R"({"domain": {"type": "rectangle"}, "s": [0.75], "p": 2.5, "ladder": [{"n": 9}]})");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("gamma > 1"), std::string::npos) << e.what();
    }
}

TEST(ParseConfig, SyntaxErrorReportsLine) {
    try {
        parse_config("{\n  \"domain\": {\"type\": \"interval\"},\n  \"s\": [0.75,,]\n}");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(ParseConfig, UnknownKeysAndChecks) {
    try {
        parse_config("{\n \"domain\": {\"type\": \"interval\"},\n \"ladder\": [{\"n\": 9}],\n \"tolerence\": 1\n}");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string m = e.what();
        EXPECT_NE(m.find("tolerence"), std::string::npos);
        EXPECT_NE(m.find("line 4"), std::string::npos) << m;
    }
    EXPECT_THROW(parse_config(R"({"domain": {"type": "interval"}, "checks": ["hopf"], "ladder": [{"n": 9}]})"),
                 ConfigError);
    EXPECT_THROW(parse_config(R"({"domain": {"type": "disc"}, "ladder": [{"n": 9}]})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"domain": {"type": "interval"}, "ladder": []})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"domain": {"type": "interval"}, "s": [1.0], "ladder": [{"n": 9}]})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"domain": {"type": "interval"}, "s": "x", "ladder": [{"n": 9}]})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"domain": {"type": "interval"}, "dirichlet": ["front"], "ladder": [{"n": 9}]})"),
                 ConfigError);
}

TEST(ParseConfig, RoundTripThroughEcho) {
    const auto cfg = parse_config(R"({
        "domain": {"type": "rectangle", "lx": 2.0, "ly": 1.0},
        "dirichlet": ["left", "bottom:0.5"],
        "s": [0.6, 0.9], "p": 5, "r": 1.5,
        "checks": "all",
        "rhs": {"constant": 2.0, "bumps": [{"center": [1.0, 0.5], "radius": 0.2}], "random_bumps": 3},
        "ladder": [{"n": 9, "levels": 8, "height": 3.0, "beta": 2.0}],
        "alpha_ladder": [["left"], ["left", "top"]],
        "tolerances": {"isometry": 0.1},
        "seed": 42, "jobs": 3
    })");
    EXPECT_EQ(cfg.checks.size(), known_checks().size());
    EXPECT_EQ(*cfg.r, 1.5);
    EXPECT_EQ(cfg.tol.isometry, 0.1);
    EXPECT_EQ(cfg.ladder[0].beta.value(), 2.0);
    const auto again = parse_config(config_json(cfg).dump());
    EXPECT_EQ(config_json(again).dump(), config_json(cfg).dump());
}

TEST(Run, EmptyCheckListGivesConstantsOnly) {
    const RunReport rep = run(small_interval({}));
    const json j = report_json(rep);
    EXPECT_TRUE(j["records"].empty());
    ASSERT_EQ(j["constants"].size(), 1u);
    EXPECT_NEAR(j["constants"][0]["kappa"].get<double>(), kappa(0.75), 1e-15);
    EXPECT_EQ(j["constants"][0]["lambda1"].size(), 2u);
    EXPECT_TRUE(j["summary"]["pass"].get<bool>());
    EXPECT_FALSE(json::parse(j.dump()).is_null());
}

TEST(Run, DeterministicAcrossReruns) {
    auto cfg = small_interval({"max_principle", "hopf_lower", "duality", "extension_trace"});
    cfg.seed = 9;
    const std::string a = report_json(run(cfg), false).dump();
    const std::string b = report_json(run(cfg), false).dump();
    EXPECT_EQ(a, b);
    // the worker count only changes the echoed config
    cfg.jobs = 3;
    const json c = report_json(run(cfg), false);
    const json d = json::parse(a);
    EXPECT_EQ(c["records"].dump(), d["records"].dump());
    EXPECT_EQ(c["trends"].dump(), d["trends"].dump());
}

TEST(Run, CsvRowPerCheckAndLevel) {
    auto cfg = small_interval({"kappa", "torsion", "isometry"});
    cfg.s = {0.6, 0.9};
    const RunReport rep = run(cfg);
    // kappa and isometry per s; torsion once
    EXPECT_EQ(rep.records.size(), (2u + 2u + 1u) * cfg.ladder.size());
    const std::string csv = records_csv(rep);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(rep.records.size()) + 1);
}

TEST(Run, FailingCheckIsIsolated) {
    auto cfg = small_interval({"ratio_bound", "kappa"});
    cfg.ratio_bumps = {{{0.05, 0.0}, 0.2, 1.0}};  // ball leaves the domain
    const RunReport rep = run(cfg);
    ASSERT_EQ(rep.records.size(), 4u);
    for (const auto& r : rep.records) {
        if (r.check == "ratio_bound") {
            EXPECT_FALSE(r.pass);
            EXPECT_EQ(r.note.rfind("error", 0), 0u);
        } else {
            EXPECT_TRUE(r.pass);
        }
    }
    EXPECT_EQ(rep.exit_code(), 1);
}

TEST(Run, EmitWritesReportFiles) {
    const auto dir = std::filesystem::temp_directory_path() / "fraclab_runner_emit";
    std::filesystem::create_directories(dir);
    const RunReport rep = run(small_interval({"kappa", "boundary_growth"}));
    emit(rep, dir.string());
    const json j = json::parse(read_file(dir / "report.json"));
    EXPECT_EQ(j["records"].size(), rep.records.size());
    EXPECT_TRUE(j.contains("timing"));
    EXPECT_FALSE(read_file(dir / "trends.csv").empty());
    std::filesystem::remove_all(dir);
}

TEST(ClosedForm, MixedSquareEigenvalues) {
    auto g = build_grid(DomainSpec::rectangle(1.0, 1.0, 9, 9));
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const auto e = closed_form_eigenvalues(*g, {"left", "bottom"}, 3);
    ASSERT_TRUE(e.has_value());
    EXPECT_NEAR((*e)[0], 0.5 * pi2, 1e-12);
    EXPECT_NEAR((*e)[1], 2.5 * pi2, 1e-12);
    EXPECT_NEAR((*e)[2], 2.5 * pi2, 1e-12);
    EXPECT_FALSE(closed_form_eigenvalues(*g, {"left:0.5"}, 3).has_value());
    auto line = build_grid(DomainSpec::interval(2.0, 9));
    EXPECT_NEAR((*closed_form_eigenvalues(*line, {"left", "right"}, 1))[0], pi2 / 4.0, 1e-12);
}

TEST(Families, GeneratedBumpsFitTheDomain) {
    auto g = build_grid(DomainSpec::rectangle(1.0, 1.0, 17, 17));
    for (const auto& b : random_bump_family(*g, 20, 3)) EXPECT_NO_THROW(realize(g, b));
    for (const auto& b : spread_bump_family(*g)) EXPECT_NO_THROW(realize(g, b));
    for (const auto& face : {"left", "right", "bottom:0.5", "top:0.5-1"}) {
        const auto fam = approach_family(*g, {face});
        ASSERT_EQ(fam.size(), 6u);
        for (const auto& b : fam) EXPECT_NO_THROW(realize(g, b));
    }
    EXPECT_EQ(hardy_corpus(g).size(), 10u);
}

TEST(Run, DefaultIntervalSuiteWithinBudget) {
    const auto cfg = load_config(FRACLAB_CONFIG_DIR "/interval_mixed.json");
    const auto t0 = std::chrono::steady_clock::now();
    const RunReport rep = run(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(secs, 120.0);
    EXPECT_EQ(rep.hard_failures(), 0);
    std::set<std::string> seen;
    for (const auto& r : rep.records) seen.insert(r.check);
    EXPECT_EQ(seen.size(), known_checks().size());
}
