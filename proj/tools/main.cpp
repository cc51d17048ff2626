#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mtsk/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool has_seed = false;
};

mtsk::pipe::PipelineConfig resolve(const CommonArgs& args) {
    mtsk::pipe::PipelineConfig cfg;
    if (!args.config.empty()) cfg = mtsk::pipe::PipelineConfig::load_file(args.config);
    if (args.has_seed) cfg.seed = args.seed;
    if (!args.out.empty()) cfg.out_dir = args.out;
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "pipeline config file (JSON)");
    cmd->add_option("--out", args.out, "run directory");
    cmd->add_option("--seed", args.seed, "master seed override")
        ->each([&args](const std::string&) { args.has_seed = true; });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "mtsk - similarity learning for labeled multivariate time series with missing data.\n"
        "Set MTSK_THREADS to control worker threads."};
    app.require_subcommand(1);

    CommonArgs args;
    std::string synth_spec, input, selection;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset with ground truth");
    synth->add_option("--spec", synth_spec, "synth spec file (JSON); omit for the default fixture");
    add_common(synth, args);

    auto* ingest = app.add_subcommand("ingest", "window, split and balance a raw CSV");
    ingest->add_option("--input", input, "raw dataset CSV");
    add_common(ingest, args);

    auto* tck = app.add_subcommand("tck", "build the cluster kernel on the train split");
    add_common(tck, args);

    auto* embed = app.add_subcommand("embed", "compress the kernel space and embed in 2-D");
    add_common(embed, args);

    auto* classify = app.add_subcommand("classify", "cross-validate and evaluate classifiers");
    add_common(classify, args);

    auto* report = app.add_subcommand("report", "render the consolidated result table");
    report->add_option("--selection", selection, "selection file (ids or a JSON polygon)");
    add_common(report, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const std::string out = args.out.empty() ? "." : args.out;
            mtsk::pipe::cmd_synth(synth_spec, out, args.seed, args.has_seed);
        } else if (ingest->parsed()) {
            auto cfg = resolve(args);
            if (!input.empty()) cfg.input = input;
            mtsk::pipe::cmd_ingest(cfg);
        } else if (tck->parsed()) {
            mtsk::pipe::cmd_tck(resolve(args));
        } else if (embed->parsed()) {
            mtsk::pipe::cmd_embed(resolve(args));
        } else if (classify->parsed()) {
            mtsk::pipe::cmd_classify(resolve(args));
        } else if (report->parsed()) {
            std::cout << mtsk::pipe::cmd_report(resolve(args), selection);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
