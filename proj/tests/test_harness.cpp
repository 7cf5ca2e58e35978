#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mmcc/harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mmcc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mmcc_test_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

harness::RunConfig tiny_lq(const fs::path& out) {
    harness::RunConfig cfg;
    cfg.problem = "lq";
    cfg.spec = json{{"d", 2}, {"horizon", 3}};
    cfg.trainer.b = 8;
    cfg.trainer.m = 16;
    cfg.trainer.n_eval = 128;
    cfg.trainer.max_sweeps = 3;
    cfg.trainer.alpha = 1e-2;
    cfg.trainer.seed = 4;
    cfg.hidden = {6};
    cfg.out_dir = out.string();
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(static_cast<bool>(is));
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// strip the per-period wall-clock column, the one nondeterministic field
std::string strip_seconds(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        auto pos = line.rfind(',');
        out << line.substr(0, pos) << '\n';
    }
    return out.str();
}

} // namespace

TEST_CASE("config parsing round-trips and rejects unknown fields") {
    json j = {{"problem", "lq"},
              {"spec", {{"d", 3}}},
              {"trainer", {{"b", 4}, {"m", 8}, {"n_eval", 32}, {"seed", 9}}},
              {"hidden", {5, 5}},
              {"oracle", false},
              {"out_dir", "x"}};
    auto cfg = harness::RunConfig::from_json(j);
    CHECK(cfg.problem == "lq");
    CHECK(cfg.trainer.b == 4);
    CHECK(cfg.trainer.seed == 9);
    CHECK(cfg.hidden == std::vector<int>{5, 5});
    CHECK_FALSE(cfg.oracle);

    j["bogus"] = 1;
    CHECK_THROWS_AS(harness::RunConfig::from_json(j), harness::ConfigError);
    j.erase("bogus");
    j["trainer"]["bogus"] = 1;
    CHECK_THROWS_AS(harness::RunConfig::from_json(j), harness::ConfigError);
}

TEST_CASE("--set overrides route to spec, trainer, and top level") {
    TempDir tmp;
    auto file = tmp.path / "cfg.json";
    std::ofstream(file) << R"({"problem":"lq","trainer":{"b":4,"m":8,"n_eval":32}})";
    auto cfg = harness::RunConfig::load(file.string(),
                                        {"horizon=5", "seed=3", "out_dir=zzz", "trainer.alpha=0.5",
                                         "spec.sigma=0.1"});
    CHECK(cfg.spec.at("horizon").get<int>() == 5);     // bare key -> spec
    CHECK(cfg.spec.at("sigma").get<double>() == 0.1);  // dotted path
    CHECK(cfg.trainer.seed == 3);                      // bare trainer key
    CHECK(cfg.trainer.alpha == 0.5);
    CHECK(cfg.out_dir == "zzz");
    CHECK_THROWS_AS(harness::RunConfig::load(file.string(), {"novalue"}), harness::ConfigError);
}

TEST_CASE("load accepts the config.json echo a run writes") {
    TempDir tmp;
    auto file = tmp.path / "echo.json";
    std::ofstream(file) << R"({"version":"0.1.0","seed":7,)"
                        << R"("config":{"problem":"lq","trainer":{"b":4,"m":8,"n_eval":32}}})";
    auto cfg = harness::RunConfig::load(file.string(), {"alpha=0.25"});
    CHECK(cfg.problem == "lq");
    CHECK(cfg.trainer.b == 4);
    CHECK(cfg.trainer.alpha == 0.25);
}

TEST_CASE("validate reports the minibatch arithmetic and spec invariants") {
    auto cfg = tiny_lq("unused");
    CHECK(harness::validate(cfg).empty());

    auto bad = cfg;
    bad.trainer.b = 64;
    bad.trainer.m = 3;
    bad.trainer.N = 100;
    auto diags = harness::validate(bad);
    REQUIRE_FALSE(diags.empty());
    CHECK(diags.front().find("b*m != N") != std::string::npos);
    bad.trainer.N = 192; // 64*3, consistent again
    CHECK(harness::validate(bad).empty());

    auto tiny_eval = cfg;
    tiny_eval.trainer.n_eval = 1;
    diags = harness::validate(tiny_eval);
    REQUIRE_FALSE(diags.empty());
    CHECK(diags.front().find("n_eval") != std::string::npos);

    auto unknown = cfg;
    unknown.problem = "nope";
    diags = harness::validate(unknown);
    REQUIRE_FALSE(diags.empty());
    CHECK(diags.front().find("unknown problem") != std::string::npos);

    harness::RunConfig growth;
    growth.problem = "growth";
    growth.spec = json{{"b", {0.4, 0.5, 0.5, 0.5, 0.5, 0.5}}}; // breaks b_i + sum a_ij = 1
    growth.trainer = cfg.trainer;
    diags = harness::validate(growth);
    REQUIRE_FALSE(diags.empty());
    CHECK(diags.front().find("sum_j a_ij = 1") != std::string::npos);
}

TEST_CASE("run writes the full artifact set and is byte-deterministic") {
    TempDir a, b;
    auto cfg1 = tiny_lq(a.path);
    REQUIRE(harness::run(cfg1) == 0);
    for (const char* f : {"config.json", "sweeps.csv", "plotdata.csv", "summary.json",
                          "stack.bin", "progress.json"})
        CHECK(fs::exists(a.path / f));

    auto summary = json::parse(slurp(a.path / "summary.json"));
    CHECK(summary.at("problem") == "lq");
    CHECK(summary.at("sweeps").get<int>() >= 1);
    CHECK(summary.contains("comparison"));
    CHECK(summary.at("comparison").contains("riccati_value"));

    auto cfg2 = tiny_lq(b.path);
    REQUIRE(harness::run(cfg2) == 0);
    CHECK(strip_seconds(slurp(a.path / "sweeps.csv")) ==
          strip_seconds(slurp(b.path / "sweeps.csv")));
    CHECK(slurp(a.path / "summary.json") == slurp(b.path / "summary.json"));
    CHECK(slurp(a.path / "plotdata.csv") == slurp(b.path / "plotdata.csv"));
}

TEST_CASE("resume continues to the same result as an uninterrupted run") {
    TempDir full_dir, part_dir;
    auto full = tiny_lq(full_dir.path);
    REQUIRE(harness::run(full) == 0);

    auto part = tiny_lq(part_dir.path);
    part.trainer.max_sweeps = 1; // stop early, leaving a checkpoint
    REQUIRE(harness::run(part) == 0);
    part.trainer.max_sweeps = 3;
    REQUIRE(harness::resume(part) == 0);

    CHECK(strip_seconds(slurp(full_dir.path / "sweeps.csv")) ==
          strip_seconds(slurp(part_dir.path / "sweeps.csv")));
    CHECK(slurp(full_dir.path / "summary.json") == slurp(part_dir.path / "summary.json"));

    harness::RunConfig empty = tiny_lq(full_dir.path / "missing");
    CHECK_THROWS_AS(harness::resume(empty), harness::ConfigError);
}

TEST_CASE("oracle verb writes the reference payload") {
    TempDir tmp;
    harness::RunConfig cfg;
    cfg.problem = "fbsde";
    cfg.spec = json{{"d", 1}, {"oracle_n_mc", 50'000}};
    cfg.out_dir = (tmp.path / "o").string();
    REQUIRE(harness::run_oracle(cfg) == 0);
    auto out = json::parse(slurp(tmp.path / "o" / "oracle.json"));
    CHECK(out.at("problem") == "fbsde");
    CHECK(out.at("oracle").contains("y_star"));
    CHECK(out.at("oracle").at("se").get<double>() > 0.0);
}
