#include <cstdint>
#include <map>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "exrec/cli.hpp"

using exrec::cli::Command;

int main(int argc, char** argv) {
    CLI::App app{"Exercise recognition from wrist and ankle accelerometers"};
    app.set_version_flag("--version", std::string(exrec::kToolVersion));
    app.require_subcommand(1);

    std::string config_path;
    exrec::cli::Overrides overrides;
    std::string limb;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string output_dir;
    std::vector<std::string> inputs;
    std::string model;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--limb", limb, "arm, leg or both")->check(CLI::IsMember({"arm", "leg", "both"}));
        sub->add_option("--seed", seed, "RNG seed (required here or in the config)");
        sub->add_option("--threads", threads, "worker threads, 0 for all cores");
        sub->add_option("--output-dir", output_dir, "directory for all artifacts");
        sub->add_option("--input", inputs, "input CSV file or directory (repeatable)");
    };

    const std::vector<std::pair<Command, std::pair<const char*, const char*>>> commands = {
        {Command::Synth, {"synth", "write a synthetic dataset in the wide CSV schema"}},
        {Command::Extract, {"extract", "write the feature matrix and catalog"}},
        {Command::Evaluate, {"evaluate", "subject-grouped cross-validation per limb"}},
        {Command::Train, {"train", "train the quantile map and both boosters per limb"}},
        {Command::Predict, {"predict", "per-window class probabilities from a trained model"}},
    };
    std::map<CLI::App*, Command> by_app;
    for (const auto& [command, text] : commands) {
        auto* sub = app.add_subcommand(text.first, text.second);
        add_common(sub);
        if (command != Command::Synth && command != Command::Predict) {
            sub->add_flag("--no-augment", overrides.no_augment, "skip placement augmentation");
        }
        if (command == Command::Predict) sub->add_option("--model", model, "model JSON written by train");
        by_app[sub] = command;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    auto* sub = app.get_subcommands().front();
    if (sub->count("--limb")) overrides.limb = limb;
    if (sub->count("--seed")) overrides.seed = seed;
    if (sub->count("--threads")) overrides.threads = threads;
    if (sub->count("--output-dir")) overrides.output_dir = output_dir;
    for (const auto& i : inputs) overrides.inputs.emplace_back(i);
    if (!model.empty()) overrides.model = model;

    try {
        std::optional<std::filesystem::path> config;
        if (!config_path.empty()) config = config_path;
        const auto run_config = exrec::cli::load_config(config, overrides);
        exrec::cli::run(by_app.at(sub), run_config, std::cout);
    } catch (const exrec::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const exrec::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const exrec::InvariantError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
