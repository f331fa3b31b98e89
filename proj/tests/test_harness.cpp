#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "sgl/csv.hpp"
#include "sgl/errors.hpp"
#include "sgl/experiments.hpp"
#include "sgl/svg.hpp"

using namespace sgl;
namespace fs = std::filesystem;

namespace {
std::string scratch() {
    const std::string dir = fs::temp_directory_path().string() + "/sgl_harness_test";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
}  // namespace

TEST_CASE("config parsing, overrides, round trip") {
    const std::string text = R"(
# sample configuration
[experiment]
kind = "kl-dynamics"
seed = 42
workers = 2

[sde]
preset = "ou"
horizon_T = 3.0

[target]
modes = [{q = 0.5, mu = -3, var = 1}, {q = 0.5, mu = 3, var = 1}]
mu_list = [3, 15]

[train]
optimizer = "sgd"
learning_rate = 0.5
kl_eval = true
)";
    ConfigFile cfg = ConfigFile::parse_text(text);
    CHECK(cfg.get_string("experiment", "kind", "") == "kl-dynamics");
    CHECK(cfg.get_int("experiment", "seed", 0) == 42);
    CHECK(cfg.get_double("train", "learning_rate", 0.0) == 0.5);
    CHECK(cfg.get_bool("train", "kl_eval", false));
    CHECK(cfg.get_array("target", "mu_list", {}) == std::vector<double>{3.0, 15.0});
    const auto modes = cfg.get_tables("target", "modes");
    REQUIRE(modes.size() == 2);
    CHECK(modes[1].at("mu") == 3.0);

    // parse(serialize(cfg)) == cfg
    const ConfigFile round = ConfigFile::parse_text(cfg.serialize());
    CHECK(round == cfg);

    // Overrides take precedence over file values.
    cfg.apply_override("train.learning_rate=0.25");
    CHECK(cfg.get_double("train", "learning_rate", 0.0) == 0.25);
    cfg.apply_override("model.kind=\"rf\"");
    CHECK(cfg.get_string("model", "kind", "") == "rf");
    CHECK_THROWS_AS(cfg.apply_override("nodot"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse_text("[sect\nkey = 1"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse_text("key 1"), ConfigError);

    const GaussianMixture gm = target_from_config(cfg);
    CHECK(gm.modes() == 2);
    CHECK(gm.means()[0] == -3.0);
    const LinearSde sde = sde_from_config(cfg);
    CHECK(sde.horizon() == 3.0);
}

TEST_CASE("csv round trip with 10-significant-digit formatting") {
    CsvTable t;
    t.header = {"epoch", "kl"};
    t.rows = {{0.0, 1.2345678912345}, {10.0, 3.0e-7}};
    const std::string path = scratch() + "/table.csv";
    write_csv(t, path);
    const std::string text = slurp(path);
    CHECK(text.find("epoch,kl") == 0);
    CHECK(text.find("1.234567891") != std::string::npos);

    const CsvTable back = read_csv(path);
    CHECK(back.header == t.header);
    CHECK(back.rows[0][1] == doctest::Approx(1.234567891).epsilon(1e-9));
    CHECK(back.column("kl") == 1);
    CHECK_THROWS_AS(back.column("missing"), ConfigError);
}

TEST_CASE("svg plotting") {
    CsvTable t;
    t.header = {"x", "y", "z"};
    t.rows = {{0.0, 1.0, 0.0}, {1.0, 2.0, 1e-18}};
    const std::string path = scratch() + "/plot.svg";
    emit_plot(t, "x", {"y"}, path);
    const std::string svg = slurp(path);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);

    // Log-scale values at or below zero are clamped, not fatal.
    PlotOptions opt;
    opt.log_y = true;
    emit_plot(t, "x", {"z"}, path, opt);
    CHECK(slurp(path).find("<polyline") != std::string::npos);

    CHECK_THROWS_WITH_AS(emit_plot(t, "x", {"nope"}, path), doctest::Contains("nope"),
                         ConfigError);
}

TEST_CASE("manifest bookkeeping") {
    RunManifest m;
    m.add("a.csv");
    CHECK_THROWS_AS(m.add("a.csv"), ConfigError);
    const std::string dir = scratch() + "/manifest";
    fs::create_directories(dir);
    m.write(dir);
    CHECK(manifest_present(dir));
    CHECK_FALSE(manifest_present(dir + "/nope"));
}

TEST_CASE("bounds experiment emits reports and scaling table") {
    RunContext ctx;
    ctx.out_dir = scratch() + "/bounds";
    fs::remove_all(ctx.out_dir);
    CHECK(run_bounds(ctx) == kExitOk);
    const CsvTable reports = read_csv(ctx.out_dir + "/bound_reports.csv");
    CHECK(!reports.rows.empty());
    const CsvTable scaling = read_csv(ctx.out_dir + "/bounds_scaling.csv");
    CHECK(scaling.rows.size() == 4);
    // Scaled totals vary by < 2x across the n sweep (criterion-6 shape).
    const auto scaled = scaling.column_values("scaled_total");
    const double lo = *std::min_element(scaled.begin(), scaled.end());
    const double hi = *std::max_element(scaled.begin(), scaled.end());
    CHECK(hi / lo < 2.0);
    CHECK(manifest_present(ctx.out_dir));
}

TEST_CASE("mc-gap experiment smoke") {
    RunContext ctx;
    ctx.out_dir = scratch() + "/mcgap";
    fs::remove_all(ctx.out_dir);
    ctx.cfg.apply_override("mcgap.m_list=[16, 32, 64]");
    ctx.cfg.apply_override("mcgap.m_ref=1024");
    ctx.cfg.apply_override("mcgap.n_mc=2048");
    CHECK(run_mc_gap(ctx) == kExitOk);
    const CsvTable gaps = read_csv(ctx.out_dir + "/mc_gap.csv");
    CHECK(gaps.rows.size() == 3);
    CHECK(gaps.rows[0][1] > gaps.rows[2][1]);  // decreasing in m
}

TEST_CASE("kl-dynamics divergence exit code and partial outputs") {
    RunContext ctx;
    ctx.out_dir = scratch() + "/diverge";
    fs::remove_all(ctx.out_dir);
    ctx.cfg.apply_override("experiment.replicates=1");
    ctx.cfg.apply_override("train.epochs=400");
    ctx.cfg.apply_override("train.n=64");
    ctx.cfg.apply_override("train.batch_size=16");
    ctx.cfg.apply_override("train.learning_rate=1e6");
    ctx.cfg.apply_override("train.grid_points=512");
    ctx.cfg.apply_override("train.sm_eval_tpoints=0");
    ctx.cfg.apply_override("model.hidden=16");
    CHECK(run_kl_dynamics(ctx) == kExitDivergence);
    CHECK(fs::exists(ctx.out_dir + "/trajectory_seed0.csv"));
    CHECK(manifest_present(ctx.out_dir));
}

TEST_CASE("experiment dispatch rejects unknown kinds") {
    RunContext ctx;
    ctx.out_dir = scratch() + "/nope";
    CHECK_THROWS_AS(run_experiment("frobnicate", ctx), ConfigError);
}
