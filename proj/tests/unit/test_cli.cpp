#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "paneitz/commands.hpp"
#include "paneitz/config.hpp"
#include "paneitz/errors.hpp"

using namespace paneitz;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kConfigs = PANEITZ_CONFIG_DIR;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("paneitz-cli-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(PANEITZ_LAB_EXE) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// The single <out>/run-<hash>/<command> directory of a test run.
fs::path only_run_dir(const fs::path& out) {
    fs::path found;
    for (const auto& e : fs::directory_iterator(out)) {
        if (e.path().filename().string().rfind("run-", 0) == 0) found = e.path();
    }
    if (found.empty()) return found;
    return fs::directory_iterator(found)->path();
}

RunConfig config(const std::string& name) { return load_config(kConfigs + "/" + name); }

}  // namespace

TEST(Cli, VerifyIdentitiesDefaultRangePasses) {
    const auto out = scratch("verify");
    EXPECT_EQ(run("verify-identities --out " + out.string(), out / "log"), 0);
    const auto report = read_json(out / "identities-5-12" / "report.json");
    EXPECT_EQ(report["failed"], 0);
    EXPECT_GT(report["checks"].get<int>(), 0);
}

TEST(Cli, VerifyIdentitiesEmptyRange) {
    const auto out = scratch("verify-empty");
    EXPECT_EQ(run("verify-identities --n-min 9 --n-max 8 --out " + out.string(), out / "log"), 0);
    const auto csv = slurp(out / "identities-9-8" / "identities.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
}

TEST(Cli, PerturbedIpqFailsWithExitOne) {
    const auto out = scratch("verify-perturbed");
    const auto r = cmd_verify_identities(5, 12, out, [](double p, double q) { return ipq(p, q) * (1.0 + 1e-6); });
    EXPECT_EQ(r.exit_code, kExitFailure);
    EXPECT_GT(r.report["failed"].get<int>(), 0);
}

TEST(Cli, UsageErrorsExitTwo) {
    const auto out = scratch("usage");
    EXPECT_EQ(run("solve", out / "log"), 2);
    EXPECT_EQ(run("frobnicate", out / "log"), 2);
    EXPECT_EQ(run("solve --config " + (out / "missing.json").string(), out / "log"), 2);
}

TEST(Cli, UnknownConfigKeyIsRejected) {
    auto j = json::parse(slurp(kConfigs + "/homogeneous_ball.json"));
    EXPECT_NO_THROW(parse_config(j));
    j["problem"]["gamme"] = 1.0;
    EXPECT_THROW(parse_config(j), ConfigError);
    j = json::parse(slurp(kConfigs + "/homogeneous_ball.json"));
    j["solver"]["tolerance"] = 1e-3;
    EXPECT_THROW(parse_config(j), ConfigError);
    j = json::parse(slurp(kConfigs + "/homogeneous_ball.json"));
    j["problem"]["dimension"] = 7.5;
    EXPECT_THROW(parse_config(j), ConfigError);

    const auto out = scratch("strict");
    j = json::parse(slurp(kConfigs + "/homogeneous_ball.json"));
    j["extra"] = true;
    std::ofstream(out / "bad.json") << j.dump();
    EXPECT_EQ(run("solve --config " + (out / "bad.json").string() + " --out " + out.string(), out / "log"), 2);
    EXPECT_NE(slurp(out / "log").find("unknown key 'extra'"), std::string::npos);
}

TEST(Cli, ConfigRoundTrip) {
    for (const char* name : {"annulus_nodal.json", "homogeneous_ball.json", "sphere_n7_expand.json"}) {
        const RunConfig a = config(name);
        const RunConfig b = parse_config(to_json(a));
        EXPECT_TRUE(a == b) << name;
        EXPECT_EQ(problem_from_json(problem_to_json(a.problem)), a.problem);
        EXPECT_EQ(config_hash(a), config_hash(b));
    }
    auto spec = config("annulus_nodal.json").problem;
    spec.f = RadialProfile::table({0.5, 0.8, 1.1, 1.5}, {1.0, 1.2, 1.1, 0.9});
    spec.alpha = RadialProfile::polynomial({0.1, 0.0, 0.3});
    EXPECT_EQ(problem_from_json(problem_to_json(spec)), spec);
}

TEST(Cli, GridSizeOverride) {
    auto cfg = config("annulus_nodal.json");
    const auto before = config_hash(cfg);
    override_grid_size(cfg, 77);
    EXPECT_EQ(cfg.problem.grid.size(), 77);
    EXPECT_DOUBLE_EQ(cfg.problem.grid.r_in(), 0.5);
    EXPECT_NE(config_hash(cfg), before);

    const auto out = scratch("grid");
    ASSERT_EQ(run("solve --config " + kConfigs + "/homogeneous_ball.json --grid-size 41 --out " + out.string(),
                  out / "log"),
              0)
        << slurp(out / "log");
    const auto report = read_json(only_run_dir(out) / "report.json");
    EXPECT_EQ(report["stamp"]["grid_size"], 41);
}

TEST(Cli, HomogeneousDataRecordsZeroExtension) {
    const auto out = scratch("homog");
    ASSERT_EQ(run("solve --config " + kConfigs + "/homogeneous_ball.json --out " + out.string(), out / "log"), 0)
        << slurp(out / "log");
    const auto dir = only_run_dir(out);
    const auto report = read_json(dir / "report.json");
    EXPECT_TRUE(report["extension"]["h_is_zero"].get<bool>());
    EXPECT_GT(report["solution"]["lambda"].get<double>(), 0.0);
    std::istringstream csv(slurp(dir / "solution.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "r,w,h,u");
    while (std::getline(csv, line)) {
        double r, w, h, u;
        char c;
        std::istringstream row(line);
        row >> r >> c >> w >> c >> h >> c >> u;
        EXPECT_EQ(h, 0.0);
        EXPECT_EQ(u, w);
    }
}

TEST(Cli, SolveIsDeterministic) {
    const auto out = scratch("det");
    const std::string args = "solve --config " + kConfigs + "/annulus_nodal.json --out " + out.string();
    ASSERT_EQ(run(args, out / "log"), 0) << slurp(out / "log");
    const auto dir = only_run_dir(out);
    const auto report = slurp(dir / "report.json");
    const auto solution = slurp(dir / "solution.csv");
    fs::remove_all(dir.parent_path());
    ASSERT_EQ(run(args, out / "log"), 0);
    EXPECT_EQ(only_run_dir(out), dir);
    EXPECT_EQ(slurp(dir / "report.json"), report);
    EXPECT_EQ(slurp(dir / "solution.csv"), solution);
    const auto j = json::parse(report);
    EXPECT_GE(j["solution"]["nodal_count"].get<int>(), 1);
    EXPECT_EQ(j["restarts"].size(), 2u);
}

TEST(Cli, SeedOverrideChangesRunDirectory) {
    auto cfg = config("annulus_nodal.json");
    const auto base = run_directory(cfg, "solve");
    EXPECT_EQ(base.filename(), "solve");
    EXPECT_EQ(run_directory(cfg, "continue").parent_path(), base.parent_path());
    cfg.seed = 8;
    EXPECT_NE(run_directory(cfg, "solve"), base);
    const auto seeded = run_directory(cfg, "solve").parent_path().filename();
    cfg.output.directory = "elsewhere";
    EXPECT_EQ(run_directory(cfg, "solve").parent_path().filename(), seeded);
}

TEST(Cli, InadmissibleLevelExitsTwoWithInequality) {
    const auto out = scratch("inadm");
    EXPECT_EQ(run("solve --config " + kConfigs + "/inadmissible.json --out " + out.string(), out / "log"), 2);
    const auto log = slurp(out / "log");
    EXPECT_NE(log.find("\\int f |h|^{2#} dv"), std::string::npos) << log;
    EXPECT_NE(log.find(">= gamma"), std::string::npos);
    const auto report = read_json(only_run_dir(out) / "report.json");
    EXPECT_TRUE(report.contains("error"));
    EXPECT_FALSE(report.contains("solution"));
}

TEST(Cli, NonCoerciveSpecExitsTwoBeforeSolving) {
    const auto out = scratch("noncoercive");
    EXPECT_EQ(run("continue --config " + kConfigs + "/noncoercive.json --out " + out.string(), out / "log"), 2);
    EXPECT_NE(slurp(out / "log").find("not coercive"), std::string::npos);
    const auto report = read_json(only_run_dir(out) / "report.json");
    EXPECT_FALSE(report.contains("trace"));
    EXPECT_FALSE(report.contains("eigen"));
}

TEST(Cli, ContinueWritesMonotoneTrace) {
    auto cfg = config("annulus_nodal.json");
    cfg.output.directory = scratch("continue").string();
    const auto r = cmd_continue(cfg);
    ASSERT_EQ(r.exit_code, kExitOk) << r.message;
    const auto& trace = r.report["trace"];
    ASSERT_EQ(trace.size(), 10u);
    for (std::size_t k = 0; k < trace.size(); ++k) {
        EXPECT_GT(trace[k]["lambda"].get<double>(), 0.0);
        if (k) EXPECT_GT(trace[k]["q"].get<double>(), trace[k - 1]["q"].get<double>());
    }
    EXPECT_TRUE(fs::exists(r.run_dir / "trace.csv"));
    EXPECT_GE(r.report["nodal_count"].get<int>(), 1);

    // A single-stage schedule reproduces the direct solve at the critical exponent.
    cfg.q_schedule = {critical_exponent(7)};
    cfg.restarts = 0;
    const auto one = cmd_continue(cfg);
    const auto direct = cmd_solve(cfg);
    ASSERT_EQ(one.exit_code, kExitOk);
    ASSERT_EQ(direct.exit_code, kExitOk);
    EXPECT_NEAR(one.report["limit_mu"].get<double>() / direct.report["solution"]["mu"].get<double>(), 1.0, 1e-12);
}

TEST(Cli, ExpandRejectsAnnulusAndShortSweeps) {
    auto cfg = config("annulus_nodal.json");
    cfg.output.directory = scratch("expand-bad").string();
    cfg.sweep.eps = {0.1, 0.05, 0.02, 0.01};
    EXPECT_EQ(cmd_expand(cfg, 1).exit_code, kExitConfig);
    auto ball = config("homogeneous_ball.json");
    ball.output.directory = cfg.output.directory;
    ball.sweep.eps = {0.1, 0.05};
    EXPECT_EQ(cmd_expand(ball, 1).exit_code, kExitConfig);
}

TEST(Cli, ExpandSixDimensionsSelectsLogModel) {
    auto cfg = config("sphere_n6_expand.json");
    override_grid_size(cfg, 600);
    cfg.sweep.eps = {0.1, 0.07, 0.05, 0.03, 0.02};
    cfg.sweep.refine = false;
    cfg.output.directory = scratch("expand6").string();
    const auto r = cmd_expand(cfg, 2);
    ASSERT_EQ(r.exit_code, kExitOk) << r.message;
    EXPECT_EQ(r.report["fit"]["model"], "eps2_log");
    EXPECT_TRUE(r.report["fit"].contains("c2_rederived"));
    EXPECT_TRUE(fs::exists(r.run_dir / "expansion.csv"));
    EXPECT_TRUE(r.report["certificate"].contains("nontrivial_nodal"));
}
