#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include <hc/runner.hpp>

namespace {

struct GlobalOptions {
    std::string config_path;
    std::string out_dir;
    int threads = 1;
    bool no_cache = false;
    std::uint64_t seed = 0; // 0: keep the config's seed
};

int dispatch(const GlobalOptions &opts, const std::string &command) {
    hc::runner::RunConfig cfg;
    try {
        if (!opts.config_path.empty()) cfg = hc::runner::load_config(opts.config_path);
        if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
        cfg.threads = opts.threads;
        cfg.use_cache = !opts.no_cache;
        if (opts.seed) cfg.seed = opts.seed;
    } catch (const hc::Error &e) {
        std::fprintf(stderr, "%s: %s\n", hc::to_string(e.code()), e.what());
        return 2;
    }

    hc::runner::CommandResult result;
    if (command == "validate") result = hc::runner::cmd_validate(cfg);
    else if (command == "homogenize") result = hc::runner::cmd_homogenize(cfg);
    else if (command == "correctors") result = hc::runner::cmd_correctors(cfg);
    else if (command == "sweep") result = hc::runner::cmd_sweep(cfg);
    else if (command == "spectrum") result = hc::runner::cmd_spectrum(cfg);
    else result = hc::runner::cmd_report(cfg);

    std::FILE *stream = result.exit_code == 0 ? stdout : stderr;
    std::fprintf(stream, "%s\n", result.message.c_str());
    return result.exit_code;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Numerical laboratory for high-contrast periodic homogenization"};
    app.require_subcommand(1);

    GlobalOptions opts;
    app.add_option("--config", opts.config_path, "JSON configuration file");
    app.add_option("--out", opts.out_dir, "Output directory override");
    app.add_option("--threads", opts.threads, "Worker thread count")->check(CLI::PositiveNumber);
    app.add_flag("--no-cache", opts.no_cache, "Disable the result cache");
    app.add_option("--seed", opts.seed, "Seed override (nonzero)");

    static const char *commands[] = {"validate", "homogenize", "correctors",
                                     "sweep", "spectrum", "report"};
    static const char *descriptions[] = {
        "Build the cell model and report assumption checks",
        "Solve the cell problems and emit the effective tensor",
        "Inner corrector residuals over the eps list",
        "Resolvent-distance sweeps over quasimomentum grids",
        "Dirichlet eigendata, limit set, and Bloch band trend",
        "Merge section outputs into report.json"};
    for (std::size_t i = 0; i < 6; ++i)
        app.add_subcommand(commands[i], descriptions[i])->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2; // usage problems are configuration errors
    }

    return dispatch(opts, app.get_subcommands().front()->get_name());
}
