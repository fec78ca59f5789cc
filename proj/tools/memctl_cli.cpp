#include "memctl/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct RunArgs {
    std::string config;
    std::string preset;
    std::string out;
    std::uint64_t seed = 0;
};

void add_run_options(CLI::App* cmd, RunArgs& args) {
    auto* config = cmd->add_option("--config,-c", args.config, "scenario config file")->check(CLI::ExistingFile);
    auto* preset = cmd->add_option("--preset,-p", args.preset, "run a built-in preset instead of a file");
    config->excludes(preset);
    cmd->add_option("--out,-o", args.out, "output directory (overrides output_dir)");
    cmd->add_option("--seed,-s", args.seed, "seed for randomized checks (overrides seed)");
}

int execute(const RunArgs& args, const CLI::App* cmd, std::optional<std::string> mode) {
    memctl::RunOptions opts;
    opts.mode = std::move(mode);
    if (!args.out.empty()) opts.out_dir = args.out;
    if (cmd->count("--seed")) opts.seed = args.seed;
    if (args.config.empty() && args.preset.empty() && !opts.mode) {
        std::cerr << "error: run needs --config or --preset\n";
        return memctl::exit_usage;
    }
    memctl::RunOutcome r;
    if (!args.config.empty()) r = memctl::run_config_file(args.config, opts, std::cerr);
    else r = memctl::run_preset(args.preset.empty() ? *opts.mode : args.preset, opts, std::cerr);

    if (r.exit_code == memctl::exit_ok) {
        std::cout << "ok: wrote";
        for (const auto& a : r.artifacts) std::cout << ' ' << (r.output_dir / a).string();
        std::cout << '\n';
    } else {
        std::cerr << "error (exit " << r.exit_code << "): " << r.message << '\n';
    }
    return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"memctl - resolvent operators, delay dynamics and approximate steering for a heat equation with memory"};
    app.require_subcommand(0, 1);
    bool list_presets = false;
    app.add_flag("--list-presets", list_presets, "print the built-in presets and exit");

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "run the mode selected in the config");
    add_run_options(run, run_args);

    // One alias per mode: `memctl lambda-sweep --config f` forces that mode;
    // without --config/--preset the preset of the same name is used.
    std::vector<std::pair<CLI::App*, std::string>> aliases;
    std::vector<RunArgs> alias_args(5);
    const char* modes[] = {"resolvent-check", "steer-linear", "steer-nonlinear", "lambda-sweep", "duality-lab"};
    for (int k = 0; k < 5; ++k) {
        auto* sub = app.add_subcommand(modes[k], std::string("run in ") + modes[k] + " mode");
        add_run_options(sub, alias_args[static_cast<std::size_t>(k)]);
        aliases.emplace_back(sub, modes[k]);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : memctl::exit_usage;
    }

    if (list_presets) {
        for (const auto& name : memctl::preset_names()) std::cout << name << '\n';
        return 0;
    }
    if (*run) return execute(run_args, run, std::nullopt);
    for (std::size_t k = 0; k < aliases.size(); ++k)
        if (*aliases[k].first) return execute(alias_args[k], aliases[k].first, aliases[k].second);

    std::cout << app.help();
    return memctl::exit_usage;
}
