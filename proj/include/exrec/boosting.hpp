#pragma once

// Multiclass histogram gradient-boosted decision trees.
//
// Features are discretized once into at most 255 bins per column. Each
// boosting iteration computes softmax probabilities for every row and grows
// one tree per class on the gradients g = w (p - y) and hessians
// h = w p (1 - p). Trees grow best-first: the open leaf with the largest
// split gain is split next until max_leaves is reached or no leaf has a
// positive-gain split that respects min_samples_leaf.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "exrec/core.hpp"
#include "exrec/matrix.hpp"
#include "json.hpp"

namespace exrec::boost {

enum class ClassWeighting { Balanced, None };

struct TrainConfig {
    std::size_t iterations = 100;
    double learning_rate = 0.1;
    std::size_t max_leaves = 31;
    std::size_t min_samples_leaf = 20;
    double l2_regularization = 0.0;
    std::size_t max_bins = 255;
    // Nodes and children whose hessian sum falls below this are not split.
    double min_hessian_to_split = 1e-3;
    ClassWeighting class_weighting = ClassWeighting::Balanced;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    // Balanced class weights, no L2 penalty.
    static TrainConfig balanced_histogram();
    // Unit weights, L2 penalty of 1.
    static TrainConfig regularized_unweighted();

    void validate() const;  // throws ConfigError

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& doc, TrainConfig defaults);

    bool operator==(const TrainConfig&) const = default;
};

struct ClassWeights {
    std::vector<double> per_row;
    bool degenerate = false;  // only one class present
};

// Row weight N / (K_present * n_c).
ClassWeights balanced_weights(std::span<const std::size_t> labels);

class BinMapper {
public:
    BinMapper() = default;
    explicit BinMapper(std::vector<std::vector<double>> thresholds);

    std::size_t features() const { return thresholds_.size(); }
    std::size_t bins(std::size_t feature) const { return thresholds_[feature].size() + 1; }
    const std::vector<double>& thresholds(std::size_t feature) const { return thresholds_[feature]; }
    const std::vector<std::vector<double>>& all_thresholds() const { return thresholds_; }

    // Smallest i with value <= thresholds[i]; the last bin otherwise.
    std::uint8_t bin(std::size_t feature, double value) const;

    bool operator==(const BinMapper&) const = default;

private:
    std::vector<std::vector<double>> thresholds_;
};

BinMapper fit_bins(const FeatureMatrix& matrix, std::size_t max_bins, unsigned threads = 1);

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    std::uint16_t bin = 0;      // rows with bin <= this go left
    double threshold = 0.0;     // raw-value form of `bin`
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;         // leaf contribution, already scaled by the learning rate

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(std::span<const double> row) const;
    std::size_t leaves() const;
    bool operator==(const Tree&) const = default;
};

class BoostedEnsemble {
public:
    LabelSet label_set;
    std::vector<std::string> feature_names;
    std::vector<double> init_scores;
    std::vector<Tree> trees;  // iteration-major, label_set.size() trees per iteration
    double learning_rate = 0.1;
    BinMapper bin_mapper;
    TrainConfig config;

    std::size_t classes() const { return label_set.size(); }
    std::size_t iterations() const { return classes() == 0 ? 0 : trees.size() / classes(); }

    std::vector<double> raw_scores(std::span<const double> row) const;
    // Throws DataError when the row width differs from the training columns.
    std::vector<double> predict_proba(std::span<const double> row) const;
    // Checks column names before predicting every row.
    std::vector<std::vector<double>> predict_proba(const FeatureMatrix& matrix) const;

    nlohmann::json to_json() const;
    static BoostedEnsemble from_json(const nlohmann::json& doc);

    bool operator==(const BoostedEnsemble&) const = default;
};

struct TrainTrace {
    // Weighted mean training log-loss after 0, 1, ..., iterations rounds.
    std::vector<double> loss;
    bool degenerate_weights = false;
};

// `labels` index into `label_set`. Throws DataError for single-class input,
// non-finite features, or fewer than 2 * min_samples_leaf rows.
BoostedEnsemble train_gbdt(const FeatureMatrix& matrix, std::span<const std::size_t> labels,
                           const LabelSet& label_set, const TrainConfig& config,
                           TrainTrace* trace = nullptr);

std::vector<double> softmax(std::span<const double> scores);

struct Vote {
    std::vector<double> probabilities;
    std::size_t predicted = 0;
};

// Element-wise mean of two probability vectors; argmax ties go to the lowest index.
Vote soft_vote(std::span<const double> first, std::span<const double> second);

std::size_t argmax(std::span<const double> values);

namespace detail {

// Per-bin gradient statistics for every feature, laid out feature-major.
struct HistogramBin {
    double g = 0.0;
    double h = 0.0;
    std::uint32_t count = 0;
};

struct Histogram {
    std::vector<std::size_t> offsets;  // bins of feature f start at offsets[f]
    std::vector<HistogramBin> bins;
};

// Bins are packed in groups of kPack features, row by row within a group,
// so one row lookup serves several histograms.
inline constexpr std::size_t kPack = 4;
inline std::size_t packed_index(std::size_t feature, std::size_t row, std::size_t rows_total) {
    return (feature / kPack) * rows_total * kPack + row * kPack + feature % kPack;
}
inline std::size_t packed_size(std::size_t features, std::size_t rows_total) {
    return (features + kPack - 1) / kPack * kPack * rows_total;
}

Histogram build_histogram(std::span<const std::uint8_t> binned, std::size_t rows_total,
                          std::span<const std::size_t> offsets,
                          std::span<const std::uint32_t> rows, std::span<const double> gradients,
                          std::span<const double> hessians);

// Overwrites `out` (sized offsets.back()) with the histogram of `rows`.
void accumulate(std::span<const std::uint8_t> binned, std::size_t rows_total,
                std::span<const std::size_t> offsets, std::span<const std::uint32_t> rows,
                std::span<const double> gradients, std::span<const double> hessians,
                std::span<HistogramBin> out);

// parent - child, bin by bin.
Histogram subtract(const Histogram& parent, const Histogram& child);

struct SplitCandidate {
    double gain = 0.0;
    std::size_t feature = 0;
    std::size_t bin = 0;
    bool valid = false;
};

SplitCandidate best_split(const Histogram& hist, double lambda, std::size_t min_samples_leaf,
                          double min_hessian);

struct NodeTotals {
    double g = 0.0;
    double h = 0.0;
    std::size_t count = 0;
};

// Folds the thresholds of one feature into `best`; gains strictly greater
// than the current best win, so earlier features and bins keep ties.
void scan_feature(const HistogramBin* bins, std::size_t nbins, std::size_t feature,
                  const NodeTotals& totals, double lambda, std::size_t min_samples_leaf,
                  double min_hessian, SplitCandidate& best);
double split_gain(double gl, double hl, double gr, double hr, double lambda);

}  // namespace detail

}  // namespace exrec::boost
