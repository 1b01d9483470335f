#pragma once

// Subject-grouped cross-validation, metrics and the synthetic data source.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "exrec/augment.hpp"
#include "exrec/boosting.hpp"
#include "exrec/core.hpp"
#include "exrec/ingest.hpp"
#include "exrec/normalize.hpp"
#include "json.hpp"

namespace exrec::eval {

struct FoldPlan {
    std::vector<std::vector<std::string>> validation;
    std::vector<std::vector<std::string>> training;

    std::size_t folds() const { return validation.size(); }
};

// Deduplicates and sorts subjects, shuffles them with `seed`, then deals them
// round-robin into k validation groups.
FoldPlan group_kfold(std::vector<std::string> subjects, std::size_t k, std::uint64_t seed);

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth,
                                 std::span<const std::size_t> pred, std::size_t classes);

// Unweighted mean of per-class F1 over classes occurring in truth or pred.
double macro_f1(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                std::size_t classes);

struct PipelineConfig {
    double rate_hz = 50.0;
    augment::Policy policy = augment::default_policy();
    std::size_t n_quantiles = normalize::kDefaultQuantiles;
    boost::TrainConfig balanced = boost::TrainConfig::balanced_histogram();
    boost::TrainConfig regularized = boost::TrainConfig::regularized_unweighted();
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    nlohmann::json to_json() const;
};

struct FoldResult {
    std::vector<std::string> validation_subjects;
    std::vector<std::string> training_subjects;
    std::size_t training_rows = 0;
    std::size_t validation_rows = 0;
    double macro_f1 = 0.0;               // soft vote
    double macro_f1_balanced = 0.0;      // balanced-weight booster alone
    double macro_f1_regularized = 0.0;   // unweighted L2 booster alone
    ConfusionMatrix confusion;
};

struct BoxStats {
    std::size_t count = 0;
    std::size_t infinite = 0;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

// Quartiles over the finite values; infinities are only counted.
BoxStats box_stats(std::vector<double> values);

struct EvalReport {
    Limb limb = Limb::Arm;
    LabelSet label_set;
    std::vector<FoldResult> folds;
    double mean_f1 = 0.0;
    double std_f1 = 0.0;  // population
    std::vector<std::string> feature_names;
    std::vector<double> anova;  // empty when fewer than 2 classes
    nlohmann::json config;

    nlohmann::json to_json() const;
    void write_confusion_csv(std::ostream& out) const;
    void write_fscore_box_csv(std::ostream& out) const;
};

// Fuses sides for `limb`, plans subject folds, augments training windows
// only, fits the quantile map on training rows, trains both boosters and
// scores the soft vote on the untouched validation windows.
EvalReport run_cv(const ingest::WindowedDataset& dataset, Limb limb, const PipelineConfig& config);

struct SynthConfig {
    std::size_t subjects = 10;
    std::size_t classes = 4;  // including the Null class
    double rate_hz = 50.0;
    double seconds_per_class = 60.0;
    std::uint64_t seed = 0;
};

LabelSet synth_label_set(std::size_t classes);

// Per class a distinct triaxial signature; Null is low-amplitude noise.
// Every subject gets seeded jitter in amplitude, phase and frequency and a
// stream for each limb and side.
std::vector<ingest::SensorStream> synth_generate(const SynthConfig& config);

}  // namespace exrec::eval
