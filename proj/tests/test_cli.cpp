#include <doctest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "apsems/errors.hpp"
#include "apsems/freqres.hpp"
#include "apsems/run_config.hpp"
#include "apsems/solver.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace apsems;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("apsems_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args, const fs::path& dir) {
    const std::string cmd = std::string(APSEMS_CLI) + " " + args + " > " + (dir / "stdout.txt").string() + " 2> " +
                            (dir / "stderr.txt").string();
    const int raw = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(raw));
    return WEXITSTATUS(raw);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string canonical() { return testing::fixture("canonical.json").string(); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("run configuration parsing") {
    const fs::path base = "/tmp/cfgbase";
    auto cfg = parse_run_config(R"({"system": "sys.json", "data": "d/series.csv",
                                    "run": {"steps": 4, "variant": "II", "seed": 11},
                                    "initial": {"soc": 0.3, "gt_states": [1, 0]}})",
                                base);
    CHECK(cfg.system_path == base / "sys.json");
    CHECK(cfg.data_path == base / "d/series.csv");
    CHECK(cfg.settings.steps == 4);
    CHECK(cfg.settings.variant == Variant::II);
    CHECK(cfg.settings.seed == 11);
    CHECK(cfg.settings.soc0 == 0.3);
    CHECK(cfg.settings.initial_states == std::vector<int>{1, 0});

    auto abs = parse_run_config(R"({"system": "/abs/sys.json", "data": "x.csv"})", base);
    CHECK(abs.system_path == fs::path("/abs/sys.json"));

    CHECK_THROWS_AS(parse_run_config(R"({"system": "s", "data": "d", "bogus": 1})", base), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"system": "s", "data": "d", "run": {"stpes": 3}})", base), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"data": "d"})", base), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"system": "s", "data": "d", "run": {"variant": "IV"}})", base), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"system": "s", "data": "d", "initial": {"soc": 1.5}})", base), ConfigError);
    CHECK_THROWS_AS(parse_run_config("{not json", base), ConfigError);
    try {
        parse_run_config(R"({"system": "s", "data": "d", "bogus": 1, "run": {"steps": -2}})", base);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("bogus") != std::string::npos);
        CHECK(msg.find("steps") != std::string::npos);
    }
}

TEST_CASE("fixture configuration loads and splits the series") {
    const auto cfg = load_run_config(testing::fixture("canonical.json"));
    const auto data = load_run_data(cfg);
    CHECK(data.history.load.size() == 1920);
    CHECK(data.realized.load.size() == 40);
    CHECK(data.system.n_g() == 3);
    CHECK(data.realized.load.start == data.history.load.time_at(1920));
}

TEST_CASE("missing data file exits 1") {
    const auto dir = scratch("missing");
    CHECK(run_cli("schedule --config " + canonical() + " --data /nonexistent/x.csv --out " + dir.string(), dir) == 1);
    CHECK(run_cli("schedule --config /nonexistent.json --out " + dir.string(), dir) == 1);
    CHECK(run_cli("schedule --config " + canonical() + " --variant IV --out " + dir.string(), dir) == 1);
    CHECK(run_cli("frobnicate", dir) == 1);
}

TEST_CASE("malformed CSV exits 1 with the line number") {
    const auto dir = scratch("badcsv");
    {
        std::ofstream out(dir / "bad.csv");
        out << "timestamp,load_mw,wind_mw\n"
            << "2024-01-01T00:00:00Z,10,2\n"
            << "2024-01-01T00:15:00Z,ten,2\n";
    }
    CHECK(run_cli("forecast --config " + canonical() + " --data " + (dir / "bad.csv").string() + " --out " +
                      dir.string(),
                  dir) == 1);
    CHECK(slurp(dir / "stderr.txt").find("3") != std::string::npos);
}

TEST_CASE("simulate: minimum sizing passes, undersized fails") {
    const auto dir = scratch("simulate");
    const double d = min_damping(0.4, 0.03, 0.05);
    const std::string base = "simulate --config " + canonical() + " --out " + dir.string() + " --duration 20";
    CHECK(run_cli(base + " --step 0.4 --m-total 4.001 --d-total " + std::to_string(d * 1.0001), dir) == 0);
    CHECK(fs::exists(dir / "trace.csv"));
    CHECK(run_cli(base + " --step 0.4 --m-total 1.5 --d-total 4.0", dir) == 2);
    CHECK(slurp(dir / "stdout.txt").find("FAIL") != std::string::npos);
    CHECK(run_cli(base + " --m-total 1.5 --d-total 4.0 --step 0", dir) == 0);
    CHECK(run_cli(base + " --step 0.4 --m-total 1.5 --d-total 4.0 --m-b 2.0", dir) == 1);
}

TEST_CASE("forecast writes one quantile file per step") {
    const auto dir = scratch("forecast");
    CHECK(run_cli("forecast --config " + canonical() + " --steps 3 --out " + dir.string(), dir) == 0);
    for (int k = 0; k < 3; ++k) {
        const auto p = dir / ("forecast_k" + std::to_string(k) + ".csv");
        REQUIRE(fs::exists(p));
        std::ifstream in(p);
        std::string header;
        std::getline(in, header);
        CHECK(header == "tau,value_mw");
        int rows = 0;
        double prev = -1e300;
        for (std::string line; std::getline(in, line); ++rows) {
            const double v = std::stod(line.substr(line.find(',') + 1));
            CHECK(v >= prev);
            prev = v;
        }
        CHECK(rows == 9);
    }
    CHECK_FALSE(fs::exists(dir / "forecast_k3.csv"));
}

TEST_CASE("schedule writes outputs and the exported model re-solves to the step-0 objective") {
    const auto dir = scratch("schedule");
    const int rc = run_cli("schedule --config " + canonical() + " --steps 2 --n-override 8 --export-model --out " +
                               dir.string(),
                           dir);
    CHECK(rc == 0);
    REQUIRE(fs::exists(dir / "kpi.json"));
    REQUIRE(fs::exists(dir / "schedule.csv"));
    REQUIRE(fs::exists(dir / "model.mps"));
    CHECK(fs::is_directory(dir / "traces"));

    const auto kpi = nlohmann::json::parse(slurp(dir / "kpi.json"));
    CHECK(kpi["variant"] == "III");
    CHECK(kpi["steps"] == 2);
    const double obj0 = kpi["per_step"][0]["objective"].get<double>();

    const auto model = read_mps(dir / "model.mps");
    const auto res = solve_mip(model);
    REQUIRE(res.status == MipStatus::optimal);
    CHECK(res.objective == doctest::Approx(obj0).epsilon(1e-6));
}

TEST_CASE("schedule variant I is no more expensive than variant III") {
    const auto dir = scratch("variants");
    const std::string base = "schedule --config " + canonical() + " --steps 2 --n-override 8 --out " + dir.string();
    REQUIRE(run_cli(base + " --variant I", dir) == 0);
    const double obj_i = nlohmann::json::parse(slurp(dir / "kpi.json"))["per_step"][0]["objective"].get<double>();
    REQUIRE(run_cli(base + " --variant III", dir) == 0);
    const double obj_iii = nlohmann::json::parse(slurp(dir / "kpi.json"))["per_step"][0]["objective"].get<double>();
    CHECK(obj_i <= obj_iii + 1e-6 * std::max(1.0, std::abs(obj_iii)));
}

}  // TEST_SUITE
