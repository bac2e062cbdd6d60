#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <hc/cell_model.hpp>
#include <hc/errors.hpp>
#include <hc/estimator.hpp>
#include <hc/fem.hpp>
#include <hc/fibers.hpp>
#include <hc/homogenization.hpp>
#include <hc/oracles.hpp>
#include <hc/spectra.hpp>

namespace hc {
namespace runner {

inline constexpr const char *tool_version = "hclab 1.0.0";

// ordered_json preserves insertion order: reports serialize byte-identically
// for identical inputs. Plain json sorts keys: used for canonical hashing.
using ojson = nlohmann::ordered_json;
using pjson = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

struct CoefficientDescriptor {
    std::string type = "constant"; // constant | laminate | tensor
    double value = 1.0;
    Tensor2 tensor = Tensor2::Identity();
    double a_minus = 1.0, a_plus = 4.0, fraction = 0.5;
    int axis = 0;

    static CoefficientDescriptor from_json(const pjson &j) {
        CoefficientDescriptor d;
        if (j.is_number()) { // shorthand: bare number means constant
            d.value = j.get<double>();
            return d;
        }
        if (!j.is_object() || !j.contains("type"))
            fail(ErrorCode::ConfigError, "coefficient descriptor needs a type");
        d.type = j.at("type").get<std::string>();
        if (d.type == "constant") {
            d.value = j.value("value", 1.0);
        } else if (d.type == "laminate") {
            d.a_minus = j.value("a_minus", 1.0);
            d.a_plus = j.value("a_plus", 4.0);
            d.fraction = j.value("fraction", 0.5);
            d.axis = j.value("axis", 0);
            if (d.axis != 0 && d.axis != 1) fail(ErrorCode::ConfigError, "laminate axis must be 0 or 1");
        } else if (d.type == "tensor") {
            if (!j.contains("value")) fail(ErrorCode::ConfigError, "tensor descriptor needs a value");
            const auto rows = j.at("value");
            if (!rows.is_array() || rows.size() != 2 || rows[0].size() != 2 || rows[1].size() != 2)
                fail(ErrorCode::ConfigError, "tensor value must be a 2x2 array");
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) d.tensor(r, c) = rows[r][c].get<double>();
        } else {
            fail(ErrorCode::ConfigError, "unknown coefficient type: " + d.type);
        }
        return d;
    }

    pjson to_json() const {
        pjson j;
        j["type"] = type;
        if (type == "constant") j["value"] = value;
        if (type == "laminate") {
            j["a_minus"] = a_minus;
            j["a_plus"] = a_plus;
            j["fraction"] = fraction;
            j["axis"] = axis;
        }
        if (type == "tensor")
            j["value"] = {{tensor(0, 0), tensor(0, 1)}, {tensor(1, 0), tensor(1, 1)}};
        return j;
    }

    std::vector<Tensor2> build(int n) const {
        if (type == "constant") return constant_field(n, value);
        if (type == "laminate") return laminate_field(n, a_minus, a_plus, fraction, axis);
        return constant_field(n, tensor);
    }
};

struct RunConfig {
    // geometry
    int n = 32;
    std::optional<InclusionBox> inclusion = InclusionBox{0.25, 0.75, 0.25, 0.75};
    // coefficients
    CoefficientDescriptor a1, a0;
    double nu = 1.0;
    // sweep
    std::vector<double> sweep_eps = {0.5, 0.25, 0.125, 0.0625};
    int radii_per_direction = 40;
    std::vector<double> alphas = {0.5};
    // spectra
    int spectra_J = 64;
    double lambda_max = 150.0;
    int bands = 4;
    int bloch_points = 24;
    std::vector<double> spectra_eps = {0.25, 0.125, 0.0625};
    // output + reproducibility
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    // runtime knobs: not part of the result-defining hash
    int threads = 1;
    bool use_cache = true;

    static RunConfig from_json(const pjson &j);
    pjson canonical() const;
};

inline RunConfig RunConfig::from_json(const pjson &j) {
    RunConfig cfg;
    if (j.contains("geometry")) {
        const auto &g = j.at("geometry");
        cfg.n = g.value("n", 32);
        if (g.contains("inclusion")) {
            if (g.at("inclusion").is_null()) {
                cfg.inclusion.reset();
            } else {
                const auto box = g.at("inclusion");
                if (!box.is_array() || box.size() != 4)
                    fail(ErrorCode::ConfigError, "inclusion must be [a1,b1,a2,b2] or null");
                cfg.inclusion = InclusionBox{box[0].get<double>(), box[1].get<double>(),
                                             box[2].get<double>(), box[3].get<double>()};
            }
        }
    }
    if (j.contains("coefficients")) {
        const auto &c = j.at("coefficients");
        if (c.contains("a1")) cfg.a1 = CoefficientDescriptor::from_json(c.at("a1"));
        if (c.contains("a0")) cfg.a0 = CoefficientDescriptor::from_json(c.at("a0"));
        cfg.nu = c.value("nu", 1.0);
    }
    if (j.contains("sweep")) {
        const auto &s = j.at("sweep");
        if (s.contains("eps")) cfg.sweep_eps = s.at("eps").get<std::vector<double>>();
        cfg.radii_per_direction = s.value("radii_per_direction", 40);
        if (s.contains("alphas")) cfg.alphas = s.at("alphas").get<std::vector<double>>();
    }
    if (j.contains("spectra")) {
        const auto &s = j.at("spectra");
        cfg.spectra_J = s.value("J", 64);
        cfg.lambda_max = s.value("lambda_max", 150.0);
        cfg.bands = s.value("bands", 4);
        cfg.bloch_points = s.value("bloch_points", 24);
        if (s.contains("eps")) cfg.spectra_eps = s.at("eps").get<std::vector<double>>();
    }
    if (j.contains("output")) cfg.out_dir = j.at("output").value("directory", "out");
    cfg.seed = j.value("seed", std::uint64_t(1));

    if (cfg.n < 2) fail(ErrorCode::ConfigError, "n must be at least 2");
    for (double e : cfg.sweep_eps)
        if (e <= 0 || e > 1) fail(ErrorCode::ConfigError, "sweep eps values must lie in (0,1]");
    for (double e : cfg.spectra_eps)
        if (e <= 0 || e > 1) fail(ErrorCode::ConfigError, "spectra eps values must lie in (0,1]");
    for (double a : cfg.alphas)
        if (a <= 0 || a >= 1) fail(ErrorCode::ConfigError, "alphas must lie in (0,1)");
    if (cfg.spectra_J < 1 || cfg.bands < 1 || cfg.bloch_points < 3)
        fail(ErrorCode::ConfigError, "spectra parameters out of range");
    if (cfg.radii_per_direction < 2) fail(ErrorCode::ConfigError, "radii_per_direction too small");
    return cfg;
}

inline pjson RunConfig::canonical() const {
    pjson j;
    j["geometry"]["n"] = n;
    if (inclusion)
        j["geometry"]["inclusion"] = {inclusion->a1, inclusion->b1, inclusion->a2, inclusion->b2};
    else
        j["geometry"]["inclusion"] = nullptr;
    j["coefficients"]["a1"] = a1.to_json();
    j["coefficients"]["a0"] = a0.to_json();
    j["coefficients"]["nu"] = nu;
    j["sweep"]["eps"] = sweep_eps;
    j["sweep"]["radii_per_direction"] = radii_per_direction;
    j["sweep"]["alphas"] = alphas;
    j["spectra"]["J"] = spectra_J;
    j["spectra"]["lambda_max"] = lambda_max;
    j["spectra"]["bands"] = bands;
    j["spectra"]["bloch_points"] = bloch_points;
    j["spectra"]["eps"] = spectra_eps;
    j["seed"] = seed;
    return j;
}

// ---------------------------------------------------------------------------
// Hashing and file helpers.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_hash(const RunConfig &cfg) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(cfg.canonical().dump())));
    return buf;
}

inline void write_text(const std::filesystem::path &path, const std::string &content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::ConfigError, "cannot open for writing: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline std::optional<std::string> read_text(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline RunConfig load_config(const std::string &path) {
    const auto text = read_text(path);
    if (!text) fail(ErrorCode::ConfigError, "cannot read config file: " + path);
    pjson j;
    try {
        j = pjson::parse(*text);
    } catch (const std::exception &e) {
        fail(ErrorCode::ConfigError, std::string("config parse error: ") + e.what());
    }
    return RunConfig::from_json(j);
}

inline CellModel build_model(const RunConfig &cfg) {
    CellGeometry g;
    g.n = cfg.n;
    g.inclusion = cfg.inclusion;
    CoefficientSpec c;
    c.a1 = cfg.a1.build(cfg.n);
    c.a0 = cfg.a0.build(cfg.n);
    c.nu = cfg.nu;
    return build_cell(g, c);
}

// Deterministic shortest-round-trip double formatting for CSV cells.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string dump_report(const ojson &j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Command bodies. Each returns the JSON section it persists.
// ---------------------------------------------------------------------------

inline ojson report_header(const RunConfig &cfg, const std::string &command) {
    ojson j;
    j["tool_version"] = tool_version;
    j["command"] = command;
    j["config_hash"] = config_hash(cfg);
    j["fixture_version"] = oracles::fixture_version;
    j["seed"] = cfg.seed;
    return j;
}

inline ojson run_validate(const RunConfig &cfg) {
    const CellModel model = build_model(cfg); // throws on invalid geometry/coefficients
    ojson j = report_header(cfg, "validate");
    j["geometry"]["n"] = model.n();
    j["geometry"]["has_inclusion"] = model.geometry.inclusion.has_value();
    j["soft_area"] = model.soft_area();
    j["interior_dofs"] = model.interior_nodes.size();
    const fem::KernelBasis kb0 = fem::kernel_basis(model, Vec2::Zero());
    j["kernel_dimension_at_zero"] = kb0.dimension();
    j["status"] = "valid";
    return j;
}

inline ojson run_homogenize(const RunConfig &cfg) {
    const CellModel model = build_model(cfg);
    const fem::NormContext norms(model);
    const auto cells = homogenization::solve_cell_problems(model, norms);
    const auto hom = homogenization::compute_Ahom(model, cells);

    ojson j = report_header(cfg, "homogenize");
    j["ahom"] = {{hom.A(0, 0), hom.A(0, 1)}, {hom.A(1, 0), hom.A(1, 1)}};
    const Eigen::SelfAdjointEigenSolver<Tensor2> eig(hom.A);
    j["ahom_eigenvalues"] = {eig.eigenvalues()[0], eig.eigenvalues()[1]};
    j["spd"] = eig.eigenvalues()[0] > 0;
    j["corrector_h1_norms"] = {norms.h1(cells.N1.cast<Cplx>()), norms.h1(cells.N2.cast<Cplx>())};
    return j;
}

inline ojson run_correctors(const RunConfig &cfg) {
    const CellModel model = build_model(cfg);
    const fem::NormContext norms(model);
    const auto cells = homogenization::solve_cell_problems(model, norms);
    const auto hom = homogenization::compute_Ahom(model, cells);

    const Vec2 theta(0.5, 0.5);
    const VecC F = VecC::Ones(model.n_nodes());
    homogenization::InnerCorrectorBuilder builder(model, norms, hom, cells);
    const auto cs = builder.build(theta, F);

    ojson j = report_header(cfg, "correctors");
    j["theta"] = {theta[0], theta[1]};
    ojson rows = ojson::array();
    std::vector<std::pair<double, double>> pairs;
    for (double eps : cfg.sweep_eps) {
        const double res = homogenization::case1_residual(model, norms, cs, eps);
        ojson row;
        row["eps"] = eps;
        row["hminus1_residual"] = res;
        rows.push_back(row);
        pairs.emplace_back(eps, res);
    }
    j["residuals"] = rows;
    if (pairs.size() >= 4) {
        const auto fit = estimator::fit_rate(pairs);
        j["residual_slope"] = fit.slope;
        j["residual_r2"] = fit.r2;
    }
    return j;
}

inline ojson sweep_report_json(const estimator::SweepReport &rep) {
    ojson j;
    j["eps"] = rep.eps;
    j["sup"] = rep.sup;
    j["region_sup"]["inner"] = rep.region_sup[0];
    j["region_sup"]["transition"] = rep.region_sup[1];
    j["region_sup"]["outer"] = rep.region_sup[2];
    return j;
}

inline void append_csv_rows(std::string &csv, const estimator::SweepReport &rep) {
    for (const auto &row : rep.rows) {
        csv += format_double(rep.eps);
        csv += ',';
        csv += format_double(row.theta[0]);
        csv += ',';
        csv += format_double(row.theta[1]);
        csv += ',';
        csv += estimator::region_name(row.region);
        csv += ',';
        csv += format_double(row.distance);
        csv += "\r\n";
    }
}

inline ojson run_sweep(const RunConfig &cfg, std::string &csv) {
    if (cfg.sweep_eps.empty()) fail(ErrorCode::ConfigError, "sweep eps list is empty");
    const CellModel model = build_model(cfg);
    const fem::NormContext norms(model);
    const auto cells = homogenization::solve_cell_problems(model, norms);
    const auto hom = homogenization::compute_Ahom(model, cells);
    const auto opt = estimator::distance_options(cfg.seed);

    csv = "eps,theta1,theta2,region,distance\r\n";
    ojson j = report_header(cfg, "sweep");
    j["grid"]["radii_per_direction"] = cfg.radii_per_direction;
    j["grid"]["directions"] = 3;

    // One grid per eps, shared by the full and naive sweeps so their slopes
    // compare like for like. Each alpha contributes radii bracketing its
    // matching cut eps^(alpha-1), where the naive error peaks.
    std::vector<estimator::ThetaGrid> grids;
    for (double eps : cfg.sweep_eps) {
        auto grid = estimator::ThetaGrid::build(eps, cfg.radii_per_direction);
        for (double alpha : cfg.alphas) {
            const double cut = std::pow(eps, alpha - 1.0);
            for (double f : {0.9, 0.98, 1.02, 1.15}) grid.add_radius(f * cut);
        }
        grids.push_back(std::move(grid));
    }

    ojson per_eps = ojson::array();
    std::vector<std::pair<double, double>> sup_pairs;
    for (std::size_t e = 0; e < cfg.sweep_eps.size(); ++e) {
        const double eps = cfg.sweep_eps[e];
        const auto rep = estimator::sweep(model, norms, hom, eps, grids[e], cfg.threads, opt);
        append_csv_rows(csv, rep);
        per_eps.push_back(sweep_report_json(rep));
        sup_pairs.emplace_back(eps, rep.sup);
    }
    j["full"]["per_eps"] = per_eps;
    if (sup_pairs.size() >= 4) {
        const auto fit = estimator::fit_rate(sup_pairs);
        j["full"]["slope"] = fit.slope;
        j["full"]["r2"] = fit.r2;
    }

    // Naive matching splices in the inclusion Dirichlet operator, so it only
    // exists when the soft phase is present.
    ojson naive = ojson::object();
    const std::vector<double> alphas = model.interior_nodes.empty() ? std::vector<double>{}
                                                                    : cfg.alphas;
    for (double alpha : alphas) {
        ojson section;
        ojson rows = ojson::array();
        std::vector<std::pair<double, double>> pairs;
        for (std::size_t e = 0; e < cfg.sweep_eps.size(); ++e) {
            const double eps = cfg.sweep_eps[e];
            const auto rep = estimator::naive_matching_sweep(model, norms, hom, eps, grids[e],
                                                             alpha, cfg.threads, opt);
            rows.push_back(sweep_report_json(rep));
            pairs.emplace_back(eps, rep.sup);
        }
        section["per_eps"] = rows;
        if (pairs.size() >= 4) {
            const auto fit = estimator::fit_rate(pairs);
            section["slope"] = fit.slope;
            section["r2"] = fit.r2;
        }
        char key[32];
        std::snprintf(key, sizeof(key), "alpha=%.6g", alpha);
        naive[key] = section;
    }
    j["naive"] = naive;

    // eps-frozen vs eps-dependent homogenized fibers over the unit ball grid.
    ojson closeness;
    ojson closeness_rows = ojson::array();
    std::vector<std::pair<double, double>> closeness_pairs;
    for (double eps : cfg.sweep_eps) {
        const auto unit = estimator::ThetaGrid::unit(eps, cfg.radii_per_direction);
        const auto rep = estimator::hom_closeness_sweep(model, norms, hom, eps, unit, cfg.threads);
        closeness_rows.push_back(sweep_report_json(rep));
        closeness_pairs.emplace_back(eps, rep.sup);
    }
    closeness["per_eps"] = closeness_rows;
    // Without a soft phase both homogenized fibers coincide and the sups
    // vanish identically, leaving nothing to fit.
    const bool fittable =
        std::all_of(closeness_pairs.begin(), closeness_pairs.end(),
                    [](const std::pair<double, double> &p) { return p.second > 0; });
    if (closeness_pairs.size() >= 4 && fittable) {
        const auto fit = estimator::fit_rate(closeness_pairs);
        closeness["slope"] = fit.slope;
        closeness["r2"] = fit.r2;
    }
    j["hom_closeness"] = closeness;
    return j;
}

inline ojson run_spectrum(const RunConfig &cfg) {
    const CellModel model = build_model(cfg);
    const fem::NormContext norms(model);

    const int ni = static_cast<int>(model.interior_nodes.size());
    const auto eigs = spectra::dirichlet_eigs(model, norms);
    // Truncation order: the configured J is a floor, raised until the omitted
    // poles clear lambda_max and their tail bound there drops below 1e-4.
    const int J_floor = std::min(std::max(cfg.spectra_J, 1), ni);
    int J = ni;
    double partial = 0;
    for (int k = 0; k < ni; ++k) {
        partial += eigs.weights[k];
        if (k + 1 < J_floor) continue;
        const double pole = eigs.values[k];
        if (pole <= cfg.lambda_max) continue;
        const double rem = std::max(0.0, eigs.weight_sum - partial);
        const double tail = cfg.lambda_max * cfg.lambda_max / (pole - cfg.lambda_max) * rem;
        if (tail <= 1e-4) {
            J = k + 1;
            break;
        }
    }
    const auto beta = spectra::make_beta(eigs, J);
    const auto limit = spectra::limit_spectrum(beta, cfg.lambda_max);

    ojson j = report_header(cfg, "spectrum");
    j["J"] = J;
    j["tail_at_lambda_max"] = spectra::tail_halfwidth(beta, cfg.lambda_max);
    j["lambda_max"] = cfg.lambda_max;
    j["S0"] = std::vector<double>(beta.poles.data(), beta.poles.data() + J);
    j["weights"] = std::vector<double>(beta.weights.data(), beta.weights.data() + J);
    j["weight_sum"] = eigs.weight_sum;
    j["inclusion_area"] = eigs.inclusion_area;

    // beta samples on a uniform grid, skipping pole neighborhoods.
    ojson samples = ojson::array();
    for (int i = 0; i <= 100; ++i) {
        const double lambda = cfg.lambda_max * i / 100.0;
        try {
            const double b = spectra::beta_eval(beta, lambda);
            samples.push_back(ojson::array({lambda, b}));
        } catch (const Error &) {
            continue; // pole proximity
        }
    }
    j["beta_samples"] = samples;

    ojson bands_json = ojson::array();
    for (const auto &iv : limit.intervals) bands_json.push_back(ojson::array({iv[0], iv[1]}));
    j["limit_set"] = bands_json;

    // Bloch bands per eps and the Hausdorff trend against the limit set. The
    // grid coverage radius is sized so the quadratic dispersion sweeps the
    // whole window: a_min r_cov^2 >= lambda_max.
    const auto limit_clip = limit.clipped(0.0, cfg.lambda_max);
    const auto cells = homogenization::solve_cell_problems(model, norms);
    const auto hom = homogenization::compute_Ahom(model, cells);
    const double a_min =
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(hom.A).eigenvalues().minCoeff();
    const double r_cov = std::sqrt(cfg.lambda_max / a_min);
    eig::LanczosOptions opt;
    opt.seed = cfg.seed ? cfg.seed : opt.seed;
    ojson trend = ojson::array();
    ojson clouds = ojson::object();
    for (double eps : cfg.spectra_eps) {
        const auto grid = spectra::bloch_theta_grid(cfg.bloch_points, r_cov);
        const auto bloch = spectra::bloch_spectrum(model, norms, eps, grid, cfg.bands, opt);
        const auto points = bloch.as_points().clipped(0.0, cfg.lambda_max);
        const double d = spectra::hausdorff_distance(points, limit_clip);
        ojson row;
        row["eps"] = eps;
        row["hausdorff"] = d;
        trend.push_back(row);
        std::vector<double> flat;
        for (int c = 0; c < bloch.bands.cols(); ++c)
            for (int r = 0; r < bloch.bands.rows(); ++r) flat.push_back(bloch.bands(r, c));
        char key[32];
        std::snprintf(key, sizeof(key), "eps=%.6g", eps);
        clouds[key] = flat;
    }
    j["hausdorff_trend"] = trend;
    j["bloch_bands"] = clouds;
    return j;
}

// ---------------------------------------------------------------------------
// Persistence wrapper: section files, cache, timings.
// ---------------------------------------------------------------------------

struct CommandResult {
    int exit_code = 0;
    std::string message;
};

inline std::filesystem::path section_path(const RunConfig &cfg, const std::string &name) {
    return std::filesystem::path(cfg.out_dir) / (name + ".json");
}

inline std::filesystem::path cache_path(const RunConfig &cfg, const std::string &name) {
    return std::filesystem::path(cfg.out_dir) / "cache" / (config_hash(cfg) + "-" + name + ".json");
}

/*! Runs one named command with caching (homogenize/spectrum sections only)
//  and writes <out>/<name>.json plus <out>/timings.json. Wall-clock timings
//  deliberately live outside the report files, which must be reproducible
//  byte for byte.
*/
template <class Fn>
inline CommandResult run_command(const RunConfig &cfg, const std::string &name, bool cacheable, Fn &&body) {
    try {
        const auto t0 = std::chrono::steady_clock::now();
        std::string payload;
        bool from_cache = false;
        if (cacheable && cfg.use_cache) {
            if (auto cached = read_text(cache_path(cfg, name))) {
                payload = *cached;
                from_cache = true;
            }
        }
        if (!from_cache) {
            payload = dump_report(body());
            if (cacheable && cfg.use_cache) write_text(cache_path(cfg, name), payload);
        }
        write_text(section_path(cfg, name), payload);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ojson t;
        t["command"] = name;
        t["seconds"] = seconds;
        t["from_cache"] = from_cache;
        write_text(std::filesystem::path(cfg.out_dir) / "timings.json", dump_report(t));
        return {0, name + ": ok"};
    } catch (const Error &e) {
        const int code = is_validation_error(e.code()) ? 2 : 1;
        ojson diag;
        diag["error_code"] = to_string(e.code());
        diag["message"] = e.what();
        try {
            write_text(section_path(cfg, name), dump_report(diag));
        } catch (...) {
        }
        return {code, std::string(to_string(e.code())) + ": " + e.what()};
    } catch (const std::exception &e) {
        return {1, std::string("internal error: ") + e.what()};
    }
}

inline CommandResult cmd_validate(const RunConfig &cfg) {
    return run_command(cfg, "validate", false, [&] { return run_validate(cfg); });
}

inline CommandResult cmd_homogenize(const RunConfig &cfg) {
    return run_command(cfg, "homogenize", true, [&] { return run_homogenize(cfg); });
}

inline CommandResult cmd_correctors(const RunConfig &cfg) {
    return run_command(cfg, "correctors", false, [&] { return run_correctors(cfg); });
}

inline CommandResult cmd_sweep(const RunConfig &cfg) {
    return run_command(cfg, "sweep", false, [&] {
        std::string csv;
        ojson j = run_sweep(cfg, csv);
        write_text(std::filesystem::path(cfg.out_dir) / "sweep.csv", csv);
        return j;
    });
}

inline CommandResult cmd_spectrum(const RunConfig &cfg) {
    return run_command(cfg, "spectrum", true, [&] { return run_spectrum(cfg); });
}

/*! Merges the section files present in the output directory into report.json. */
inline CommandResult cmd_report(const RunConfig &cfg) {
    return run_command(cfg, "report", false, [&] {
        ojson j = report_header(cfg, "report");
        for (const char *name : {"validate", "homogenize", "correctors", "sweep", "spectrum"}) {
            if (auto text = read_text(section_path(cfg, name))) {
                try {
                    j["sections"][name] = ojson::parse(*text);
                } catch (const std::exception &) {
                    fail(ErrorCode::ConfigError, std::string("unreadable section file: ") + name);
                }
            }
        }
        return j;
    });
}

} // namespace runner
} // namespace hc
