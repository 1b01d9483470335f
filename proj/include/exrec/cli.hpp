#pragma once

// Run configuration and the subcommands behind the exrec tool. Every command
// writes its artifacts under the configured output directory and a short
// summary to `log`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "exrec/augment.hpp"
#include "exrec/boosting.hpp"
#include "exrec/eval.hpp"
#include "exrec/ingest.hpp"
#include "exrec/normalize.hpp"
#include "json.hpp"

namespace exrec::cli {

enum class Command { Synth, Extract, Evaluate, Train, Predict };

struct SynthSettings {
    std::size_t subjects = 10;
    std::size_t classes = 4;
    double seconds_per_class = 60.0;
};

struct RunConfig {
    std::vector<std::filesystem::path> inputs;  // CSV files or directories of them
    ingest::ColumnMap columns;
    double rate_hz = 50.0;
    double window_seconds = 1.0;
    double overlap = 0.0;
    std::vector<Limb> limbs{Limb::Arm, Limb::Leg};
    augment::Policy policy = augment::default_policy();
    std::vector<std::string> labels;  // inferred from the inputs when empty
    std::size_t n_quantiles = normalize::kDefaultQuantiles;
    boost::TrainConfig balanced = boost::TrainConfig::balanced_histogram();
    boost::TrainConfig regularized = boost::TrainConfig::regularized_unweighted();
    std::size_t folds = 5;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    std::filesystem::path output_dir = "out";
    std::filesystem::path model;
    SynthSettings synth;

    // Relative paths resolve against `base_dir`. Unknown keys are a ConfigError.
    static RunConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);

    void validate(Command command) const;
    eval::PipelineConfig pipeline() const;
    ingest::WindowingConfig windowing() const;
    std::vector<std::filesystem::path> input_files() const;  // directories expanded, sorted
};

struct Overrides {
    std::optional<std::string> limb;  // arm, leg or both
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool no_augment = false;
    std::optional<std::filesystem::path> output_dir;
    std::vector<std::filesystem::path> inputs;
    std::optional<std::filesystem::path> model;
};

RunConfig load_config(const std::optional<std::filesystem::path>& file, const Overrides& overrides);

std::vector<Limb> parse_limb_selection(const std::string& text);

// Deployment artifact: the quantile map and both boosters for one limb.
struct LimbModel {
    Limb limb = Limb::Arm;
    double rate_hz = 50.0;
    double window_seconds = 1.0;
    normalize::QuantileMap quantile_map;
    boost::BoostedEnsemble balanced;
    boost::BoostedEnsemble regularized;

    nlohmann::json to_json() const;
    static LimbModel from_json(const nlohmann::json& doc);
};

void run_synth(const RunConfig& config, std::ostream& log);
void run_extract(const RunConfig& config, std::ostream& log);
void run_evaluate(const RunConfig& config, std::ostream& log);
void run_train(const RunConfig& config, std::ostream& log);
void run_predict(const RunConfig& config, std::ostream& log);

void run(Command command, const RunConfig& config, std::ostream& log);

}  // namespace exrec::cli
