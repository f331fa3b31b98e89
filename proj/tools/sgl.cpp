#include <CLI11.hpp>
#include <iostream>

#include "sgl/experiments.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
    std::vector<std::string> overrides;
};

void attach_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Config file (TOML-shaped key = value)");
    cmd->add_option("--out", args.out_dir, "Output directory");
    cmd->add_option("--seed", args.seed, "Master seed")->each([&](const std::string&) {
        args.seed_set = true;
    });
    cmd->add_option("--workers", args.workers, "Concurrent runs in sweeps");
    cmd->add_option("overrides", args.overrides, "section.key=value overrides");
}

int dispatch(const std::string& kind, const CommonArgs& args) {
    sgl::ConfigFile cfg;
    if (!args.config_path.empty()) cfg = sgl::ConfigFile::parse_file(args.config_path);
    // Precedence: file < key=value overrides < dedicated flags.
    for (const auto& ov : args.overrides) cfg.apply_override(ov);

    sgl::RunContext ctx;
    ctx.cfg = cfg;
    ctx.out_dir = !args.out_dir.empty()
                      ? args.out_dir
                      : cfg.get_string("experiment", "out", "runs/" + kind);
    ctx.master_seed = args.seed_set
                          ? args.seed
                          : static_cast<std::uint64_t>(cfg.get_int("experiment", "seed", 42));
    ctx.workers =
        args.workers > 0 ? args.workers : static_cast<int>(cfg.get_int("experiment", "workers", 1));
    return sgl::run_experiment(kind, ctx);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Score-based generative model laboratory"};
    app.require_subcommand(1);

    const std::vector<std::string> kinds = {"kl-dynamics", "modes-shift", "capacity-sweep",
                                            "bounds",      "mc-gap",      "verify"};
    std::map<std::string, CommonArgs> args;
    for (const auto& kind : kinds) {
        auto* cmd = app.add_subcommand(kind);
        attach_common(cmd, args[kind]);
    }

    CLI11_PARSE(app, argc, argv);

    const std::string kind = app.get_subcommands().front()->get_name();
    try {
        return dispatch(kind, args[kind]);
    } catch (const sgl::ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return sgl::kExitConfigError;
    } catch (const sgl::DivergenceError& err) {
        std::cerr << "numerical divergence: " << err.what() << "\n";
        return sgl::kExitDivergence;
    } catch (const sgl::NumericalError& err) {
        std::cerr << "numerical error: " << err.what() << "\n";
        return sgl::kExitDivergence;
    }
}
