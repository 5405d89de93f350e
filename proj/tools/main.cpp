#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tcnids/commands.hpp"

namespace {

struct CliFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string data;
    std::string arch;
    std::vector<std::string> models;
    std::string split = "test";
    std::string format = "all";
};

void add_config_flags(CLI::App* cmd, CliFlags& flags) {
    cmd->add_option("--config", flags.config_path, "TOML run configuration");
    cmd->add_option("--seed", flags.seed, "root RNG seed (overrides the config)");
    cmd->add_option("--out", flags.out_dir, "artifact root directory");
}

// Flags override whatever the file says; --data also replaces a configured
// fixture source, since both cannot feed one run.
tcnids::RunConfig build_config(const CliFlags& flags, bool data_is_source) {
    tcnids::RunConfig cfg;
    if (!flags.config_path.empty()) {
        cfg = tcnids::run_config_from_toml_file(flags.config_path);
    }
    if (flags.seed) {
        cfg.seed = *flags.seed;
        cfg.seed_set = true;
    }
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (data_is_source && !flags.data.empty()) {
        cfg.data = flags.data;
        cfg.fixture.reset();
    }
    if (!flags.arch.empty()) cfg.model.arch = flags.arch;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"temporal convolutional network for network intrusion detection"};
    app.require_subcommand(1);

    CliFlags flags;

    CLI::App* fixture = app.add_subcommand(
        "fixture", "generate a synthetic labelled dataset and write it as CSV");
    add_config_flags(fixture, flags);
    fixture->add_option("--data", flags.data,
                        "destination CSV path (default <out>/<hash>/fixture.csv)");

    CLI::App* preprocess = app.add_subcommand(
        "preprocess", "clean, encode, rank, split, and scale the configured dataset");
    add_config_flags(preprocess, flags);
    preprocess->add_option("--data", flags.data, "input CSV (overrides the config)");

    CLI::App* train = app.add_subcommand(
        "train", "train a model on the preprocessed artifacts for this config");
    add_config_flags(train, flags);
    train->add_option("--data", flags.data, "input CSV (overrides the config)");
    train->add_option("--arch", flags.arch, "model architecture: tcn or cnn_baseline");

    CLI::App* evaluate = app.add_subcommand(
        "evaluate", "score trained models on a held-out split and write reports");
    add_config_flags(evaluate, flags);
    evaluate->add_option("--model", flags.models, "trained model file (repeatable)")
        ->required();
    evaluate->add_option("--split", flags.split, "partition to score: train, val, or test");
    evaluate->add_option("--format", flags.format, "report outputs: all, text, json, or csv");

    CLI::App* predict = app.add_subcommand(
        "predict", "label new rows with a trained model");
    add_config_flags(predict, flags);
    predict->add_option("--model", flags.models, "trained model file")->required();
    predict->add_option("--data", flags.data, "CSV of rows to label")->required();

    CLI11_PARSE(app, argc, argv);

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (app.got_subcommand(fixture)) {
            tcnids::cmd_fixture(build_config(flags, false), flags.data, std::cout);
        } else if (app.got_subcommand(preprocess)) {
            tcnids::cmd_preprocess(build_config(flags, true), std::cout);
        } else if (app.got_subcommand(train)) {
            tcnids::cmd_train(build_config(flags, true), std::cout);
        } else if (app.got_subcommand(evaluate)) {
            tcnids::cmd_evaluate(build_config(flags, true), flags.models, flags.split,
                                 flags.format, std::cout);
        } else if (app.got_subcommand(predict)) {
            tcnids::cmd_predict(build_config(flags, false), flags.models.front(),
                                flags.data, std::cout);
        }
    } catch (const tcnids::Error& e) {
        std::fprintf(stderr, "tcnids %s: %s\n", name.c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "tcnids %s: %s\n", name.c_str(), e.what());
        return 1;
    }
    return 0;
}
