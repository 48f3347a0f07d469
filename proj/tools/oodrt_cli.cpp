// oodrt command-line entry point; the work happens in oodrt/cli/commands.hpp.

#include <CLI11.hpp>

#include "oodrt/cli/commands.hpp"

int main(int argc, char** argv) {
    using namespace oodrt::cli;
    CLI::App app{"OOD-monitored robot pipeline: data, training, tuning and demo runs"};
    app.require_subcommand(1);
    Options opt;
    std::string out, data, models;
    std::size_t videos = 0;
    std::string clock;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "JSON run config (sections world, preproc, vae, detector, ga, pipeline)");
        sub->add_option("--seed", opt.seed, "root seed")->default_val(1);
        sub->add_option("--out", out, "output directory")->default_val("out");
        return sub;
    };
    auto* gen = common(app.add_subcommand("gen-data", "render the training drive, validation drive and labelled test videos"));
    gen->add_option("--videos", videos, "number of test videos");
    auto* tood = common(app.add_subcommand("train-ood", "train, calibrate and score the flow VAE monitor"));
    tood->add_option("--data", data, "gen-data output directory")->required();
    auto* tdet = common(app.add_subcommand("train-detector", "train the int8 object detector on generated scenes"));
    tdet->add_flag("--sweep", opt.sweep, "train every input size and report ACET and confusion matrices");
    auto* tga = common(app.add_subcommand("tune-ga", "genetic search over preprocessing settings"));
    tga->add_option("--data", data, "gen-data output directory")->required();
    auto* demo = common(app.add_subcommand("run-demo", "drive the simulated robot through the real-time pipeline"));
    demo->add_option("--models", models, "directory with ood.oodm and detector.oodm")->required();
    demo->add_option("--clock", clock, "virtual or wall");
    demo->add_option("--scenario", opt.scenario, "snow, clean or both")->default_val("both");
    auto* rep = common(app.add_subcommand("report", "summarize traces, GA candidates and detector sweeps in a directory"));
    rep->add_option("--data", data, "directory to summarize")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kInputError;
    }
    opt.command = app.get_subcommands().front()->get_name();
    opt.out = out;
    opt.data = data;
    opt.models = models;
    if (gen->count("--videos")) opt.videos = videos;
    if (!clock.empty()) opt.clock = clock;
    return run_command(opt, std::cout, std::cerr);
}
