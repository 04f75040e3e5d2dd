#include <cstdio>
#include <functional>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fringeforge/errors.hpp"
#include "fringeforge/pipeline.hpp"

namespace {

void print_error(const std::string& cls, const std::string& message) {
    nlohmann::json doc;
    doc["error"] = {{"class", cls}, {"message", message}};
    std::fprintf(stderr, "%s\n", doc.dump().c_str());
}

struct Args {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string freq = "high";
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Omnidirectional fringe projection pipeline"};
    app.require_subcommand(1);

    using Command = std::function<void(const fringeforge::PipelineConfig&,
                                       const fringeforge::CommandOptions&)>;
    struct Sub {
        const char* name;
        const char* help;
        Command run;
        bool takes_seed;
        bool takes_freq;
    };
    const Sub subs[] = {
        {"simulate", "Render phase-shifted fringe stacks and ground truth", fringeforge::cmd_simulate, true, false},
        {"wrap", "Compute the wrapped phase of one stack", fringeforge::cmd_wrap, false, true},
        {"unwrap", "Two-frequency temporal unwrap of both stacks", fringeforge::cmd_unwrap, false, false},
        {"calibrate", "Fit per-pixel phase-to-coordinate cubics", fringeforge::cmd_calibrate, false, false},
        {"reconstruct", "Unwrap and evaluate the calibration into a point cloud", fringeforge::cmd_reconstruct, false, false},
        {"fit", "Fit a plane or sphere to reconstructed points", fringeforge::cmd_fit, false, false},
        {"uncertainty", "Combine an uncertainty budget", fringeforge::cmd_uncertainty, false, false},
        {"report", "Aggregate series statistics into a table", fringeforge::cmd_report, false, false},
    };

    Args args;
    const Sub* chosen = nullptr;
    for (const auto& sub : subs) {
        CLI::App* cmd = app.add_subcommand(sub.name, sub.help);
        cmd->add_option("--config", args.config, "Pipeline config file (JSON)")->required();
        cmd->add_option("--out", args.out, "Output directory (overrides config output_dir)");
        if (sub.takes_seed)
            cmd->add_option("--seed", args.seed, "Render seed (overrides config render.seed)")
                ->each([&args](const std::string&) { args.seed_set = true; });
        if (sub.takes_freq)
            cmd->add_option("--freq", args.freq, "Stack to process: high or low")
                ->check(CLI::IsMember({"high", "low"}));
        cmd->callback([&chosen, &sub] { chosen = &sub; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        print_error("ConfigError", e.what());
        return 1;
    }

    try {
        const fringeforge::PipelineConfig cfg = fringeforge::load_config(args.config);
        fringeforge::CommandOptions opts;
        if (!args.out.empty()) opts.out_dir = std::filesystem::path(args.out);
        if (args.seed_set) opts.seed = args.seed;
        opts.frequency = args.freq == "low" ? fringeforge::FrequencyTag::Low
                                            : fringeforge::FrequencyTag::High;
        chosen->run(cfg, opts);
        return 0;
    } catch (const fringeforge::Error& e) {
        print_error(e.code(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("Error", e.what());
        return 1;
    }
}
