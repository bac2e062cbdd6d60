#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <hc/runner.hpp>

using namespace hc;
using runner::RunConfig;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const char *leaf) {
    const fs::path dir = fs::temp_directory_path() / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunConfig small_spectrum_config() {
    RunConfig cfg;
    cfg.n = 8;
    cfg.spectra_J = 4;
    cfg.lambda_max = 150.0;
    cfg.bands = 2;
    cfg.bloch_points = 6;
    cfg.spectra_eps = {0.5, 0.25};
    return cfg;
}

RunConfig small_sweep_config() {
    RunConfig cfg;
    cfg.n = 8;
    cfg.radii_per_direction = 2;
    cfg.sweep_eps = {0.5, 0.25, 0.125, 0.0625};
    return cfg;
}

int count_crlf(const std::string &text) {
    int k = 0;
    for (std::size_t i = 0; i + 1 < text.size(); ++i)
        if (text[i] == '\r' && text[i + 1] == '\n') ++k;
    return k;
}

} // namespace

TEST_CASE("config parsing fills defaults and honors nested overrides", "[runner]") {
    const RunConfig d = RunConfig::from_json(runner::pjson::object());
    REQUIRE(d.n == 32);
    REQUIRE(d.inclusion.has_value());
    REQUIRE(d.inclusion->a1 == 0.25);
    REQUIRE(d.lambda_max == 150.0);
    REQUIRE(d.spectra_J == 64);
    REQUIRE(d.bands == 4);
    REQUIRE(d.bloch_points == 24);
    REQUIRE(d.sweep_eps == std::vector<double>{0.5, 0.25, 0.125, 0.0625});
    REQUIRE(d.alphas == std::vector<double>{0.5});
    REQUIRE(d.seed == 1);

    const auto j = runner::pjson::parse(R"({
        "geometry": {"n": 16, "inclusion": [0.25, 0.5, 0.25, 0.5]},
        "coefficients": {"a1": {"type": "laminate", "a_minus": 1, "a_plus": 4,
                                 "fraction": 0.5, "axis": 1},
                          "a0": 2.0},
        "sweep": {"eps": [0.5, 0.25], "radii_per_direction": 3, "alphas": [0.4]},
        "spectra": {"J": 16, "lambda_max": 90.0, "bands": 2, "bloch_points": 8,
                     "eps": [0.25]},
        "output": {"directory": "elsewhere"},
        "seed": 7})");
    const RunConfig cfg = RunConfig::from_json(j);
    REQUIRE(cfg.n == 16);
    REQUIRE(cfg.inclusion->b1 == 0.5);
    REQUIRE(cfg.a1.type == "laminate");
    REQUIRE(cfg.a1.axis == 1);
    REQUIRE(cfg.a0.type == "constant"); // bare-number shorthand
    REQUIRE(cfg.a0.value == 2.0);
    REQUIRE(cfg.lambda_max == 90.0);
    REQUIRE(cfg.bloch_points == 8);
    REQUIRE(cfg.out_dir == "elsewhere");
    REQUIRE(cfg.seed == 7);

    // Null inclusion selects the classical case.
    const auto classical =
        RunConfig::from_json(runner::pjson::parse(R"({"geometry": {"inclusion": null}})"));
    REQUIRE_FALSE(classical.inclusion.has_value());
}

TEST_CASE("config parsing rejects malformed input", "[runner]") {
    auto expect_config_error = [](const char *text) {
        REQUIRE_THROWS_AS(RunConfig::from_json(runner::pjson::parse(text)), Error);
    };
    expect_config_error(R"({"geometry": {"inclusion": [1, 2, 3]}})");
    expect_config_error(R"({"geometry": {"n": 1}})");
    expect_config_error(R"({"sweep": {"eps": [1.5]}})");
    expect_config_error(R"({"sweep": {"alphas": [1.5]}})");
    expect_config_error(R"({"sweep": {"radii_per_direction": 1}})");
    expect_config_error(R"({"spectra": {"bloch_points": 2}})");
    expect_config_error(R"({"coefficients": {"a1": {"value": 3}}})");      // missing type
    expect_config_error(R"({"coefficients": {"a1": {"type": "mystery"}}})");
    expect_config_error(R"({"coefficients": {"a1": {"type": "tensor", "value": [[1, 0]]}}})");
    expect_config_error(R"({"coefficients": {"a1": {"type": "laminate", "axis": 2}}})");
}

TEST_CASE("coefficient descriptors round-trip through JSON", "[runner]") {
    const auto lam = runner::CoefficientDescriptor::from_json(
        runner::pjson::parse(R"({"type": "laminate", "a_minus": 2, "a_plus": 3,
                                  "fraction": 0.25, "axis": 1})"));
    const auto lam2 = runner::CoefficientDescriptor::from_json(lam.to_json());
    REQUIRE(lam2.a_minus == 2.0);
    REQUIRE(lam2.fraction == 0.25);
    REQUIRE(lam2.axis == 1);

    const auto ten = runner::CoefficientDescriptor::from_json(
        runner::pjson::parse(R"({"type": "tensor", "value": [[3, 1], [1, 2]]})"));
    const auto field = ten.build(4);
    REQUIRE(field[0](0, 1) == 1.0);
    REQUIRE(field[0](1, 1) == 2.0);
}

TEST_CASE("config hash tracks results, not runtime knobs", "[runner]") {
    RunConfig a, b;
    REQUIRE(runner::config_hash(a) == runner::config_hash(b));

    b.threads = 8;
    b.use_cache = false;
    b.out_dir = "somewhere-else";
    REQUIRE(runner::config_hash(a) == runner::config_hash(b));

    b.seed = 99;
    REQUIRE(runner::config_hash(a) != runner::config_hash(b));

    RunConfig c;
    c.lambda_max = 90.0;
    REQUIRE(runner::config_hash(a) != runner::config_hash(c));
}

TEST_CASE("config loading reports missing files and parse failures", "[runner]") {
    REQUIRE_THROWS_AS(runner::load_config("/nonexistent/path.json"), Error);

    const fs::path dir = fresh_dir("hclab_cfg_test");
    const fs::path bad = dir / "bad.json";
    runner::write_text(bad, "{not json");
    REQUIRE_THROWS_AS(runner::load_config(bad.string()), Error);

    const fs::path good = dir / "good.json";
    runner::write_text(good, R"({"geometry": {"n": 8}})");
    REQUIRE(runner::load_config(good.string()).n == 8);
}

TEST_CASE("spectrum pipeline is deterministic at the byte level", "[runner]") {
    const RunConfig cfg = small_spectrum_config();
    const std::string first = runner::dump_report(runner::run_spectrum(cfg));
    const std::string second = runner::dump_report(runner::run_spectrum(cfg));
    REQUIRE(first == second);

    const auto j = runner::ojson::parse(first);
    REQUIRE(j["command"] == "spectrum");
    REQUIRE(j["J"].get<int>() >= 1);
    REQUIRE(j["limit_set"].size() >= 1);
    REQUIRE(j["hausdorff_trend"].size() == 2);
    REQUIRE(j["weight_sum"].get<double>() < j["inclusion_area"].get<double>());
}

TEST_CASE("sweep emits aligned JSON sections and CRLF rows", "[runner]") {
    const RunConfig cfg = small_sweep_config();
    std::string csv;
    const runner::ojson j = runner::run_sweep(cfg, csv);

    // Header plus one row per grid point: base grid 1 + 3*2 radii plus the
    // four cut-bracket radii along three directions for the single alpha.
    const int per_eps = 1 + 3 * 2 + 4 * 3;
    REQUIRE(count_crlf(csv) == 1 + 4 * per_eps);
    REQUIRE(csv.rfind("eps,theta1,theta2,region,distance\r\n", 0) == 0);

    REQUIRE(j["full"]["per_eps"].size() == 4);
    REQUIRE(j["full"].contains("slope"));
    REQUIRE(j["naive"].contains("alpha=0.5"));
    REQUIRE(j["naive"]["alpha=0.5"]["per_eps"].size() == 4);
    REQUIRE(j["hom_closeness"]["per_eps"].size() == 4);
    REQUIRE(j["hom_closeness"].contains("slope"));

    // Determinism across reruns, including the CSV bytes.
    std::string csv2;
    const runner::ojson j2 = runner::run_sweep(cfg, csv2);
    REQUIRE(runner::dump_report(j) == runner::dump_report(j2));
    REQUIRE(csv == csv2);
}

TEST_CASE("classical sweep skips the naive section and flat closeness fit", "[runner]") {
    RunConfig cfg = small_sweep_config();
    cfg.inclusion.reset();
    cfg.a1.type = "laminate";

    std::string csv;
    const runner::ojson j = runner::run_sweep(cfg, csv);
    REQUIRE(j["naive"].empty());
    REQUIRE(j["full"].contains("slope"));
    // Identical frozen and moving fibers: suprema vanish, no fit possible.
    REQUIRE_FALSE(j["hom_closeness"].contains("slope"));
    for (const auto &row : j["hom_closeness"]["per_eps"]) REQUIRE(row["sup"].get<double>() == 0.0);
}

TEST_CASE("commands persist sections, diagnostics, and cache state", "[runner]") {
    RunConfig cfg;
    cfg.n = 8;
    cfg.out_dir = fresh_dir("hclab_cmd_test").string();

    const auto ok = runner::cmd_validate(cfg);
    REQUIRE(ok.exit_code == 0);
    REQUIRE(fs::exists(fs::path(cfg.out_dir) / "validate.json"));
    REQUIRE(fs::exists(fs::path(cfg.out_dir) / "timings.json"));

    // First homogenize computes; the second run is served from the cache.
    REQUIRE(runner::cmd_homogenize(cfg).exit_code == 0);
    auto timing = runner::ojson::parse(*runner::read_text(fs::path(cfg.out_dir) / "timings.json"));
    REQUIRE(timing["from_cache"] == false);
    REQUIRE(runner::cmd_homogenize(cfg).exit_code == 0);
    timing = runner::ojson::parse(*runner::read_text(fs::path(cfg.out_dir) / "timings.json"));
    REQUIRE(timing["from_cache"] == true);

    // Cache bypass recomputes but produces the identical section payload.
    const std::string cached = *runner::read_text(fs::path(cfg.out_dir) / "homogenize.json");
    cfg.use_cache = false;
    REQUIRE(runner::cmd_homogenize(cfg).exit_code == 0);
    REQUIRE(*runner::read_text(fs::path(cfg.out_dir) / "homogenize.json") == cached);

    // Validation failures exit with status 2 and leave a diagnostic section.
    RunConfig bad = cfg;
    bad.inclusion = InclusionBox{0.0, 0.5, 0.25, 0.75};
    const auto failed = runner::cmd_validate(bad);
    REQUIRE(failed.exit_code == 2);
    const auto diag = runner::ojson::parse(*runner::read_text(fs::path(cfg.out_dir) / "validate.json"));
    REQUIRE(diag["error_code"] == "InclusionTouchesBoundary");

    // Report merges whatever sections exist.
    cfg.use_cache = true;
    REQUIRE(runner::cmd_validate(cfg).exit_code == 0);
    REQUIRE(runner::cmd_report(cfg).exit_code == 0);
    const auto report = runner::ojson::parse(*runner::read_text(fs::path(cfg.out_dir) / "report.json"));
    REQUIRE(report["sections"].contains("validate"));
    REQUIRE(report["sections"].contains("homogenize"));
    REQUIRE_FALSE(report["sections"].contains("sweep"));
}

TEST_CASE("CSV doubles survive the round trip", "[runner]") {
    for (double v : {0.1, 1.0 / 3.0, 6.0625, 1e-17, 123456.789})
        REQUIRE(std::stod(runner::format_double(v)) == v);
}
