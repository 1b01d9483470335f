#include "exrec/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "exrec/parallel.hpp"

namespace exrec::boost {

TrainConfig TrainConfig::balanced_histogram() {
    TrainConfig c;
    c.class_weighting = ClassWeighting::Balanced;
    c.l2_regularization = 0.0;
    return c;
}

TrainConfig TrainConfig::regularized_unweighted() {
    TrainConfig c;
    c.class_weighting = ClassWeighting::None;
    c.l2_regularization = 1.0;
    return c;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be positive");
    }
    if (max_leaves < 2) throw ConfigError("max_leaves must be at least 2");
    if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be at least 1");
    if (!(l2_regularization >= 0.0)) throw ConfigError("l2_regularization must be non-negative");
    if (max_bins < 2 || max_bins > 256) throw ConfigError("max_bins must lie in [2, 256]");
    if (!(min_hessian_to_split >= 0.0)) throw ConfigError("min_hessian_to_split must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
    return {
        {"iterations", iterations},
        {"learning_rate", learning_rate},
        {"max_leaves", max_leaves},
        {"min_samples_leaf", min_samples_leaf},
        {"l2_regularization", l2_regularization},
        {"max_bins", max_bins},
        {"min_hessian_to_split", min_hessian_to_split},
        {"class_weighting", class_weighting == ClassWeighting::Balanced ? "balanced" : "none"},
        {"seed", seed},
    };
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc, TrainConfig c) {
    if (!doc.is_object()) throw ConfigError("booster config must be an object");
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "iterations") c.iterations = value.get<std::size_t>();
            else if (key == "learning_rate") c.learning_rate = value.get<double>();
            else if (key == "max_leaves") c.max_leaves = value.get<std::size_t>();
            else if (key == "min_samples_leaf") c.min_samples_leaf = value.get<std::size_t>();
            else if (key == "l2_regularization") c.l2_regularization = value.get<double>();
            else if (key == "max_bins") c.max_bins = value.get<std::size_t>();
            else if (key == "min_hessian_to_split") c.min_hessian_to_split = value.get<double>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "class_weighting") {
                const auto text = value.get<std::string>();
                if (text == "balanced") c.class_weighting = ClassWeighting::Balanced;
                else if (text == "none") c.class_weighting = ClassWeighting::None;
                else throw ConfigError("class_weighting must be 'balanced' or 'none'");
            } else {
                throw ConfigError("unknown booster config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("booster config: ") + e.what());
    }
    c.validate();
    return c;
}

ClassWeights balanced_weights(std::span<const std::size_t> labels) {
    if (labels.empty()) throw DataError("balanced_weights: no labels");
    const std::size_t max_label = *std::max_element(labels.begin(), labels.end());
    std::vector<std::size_t> counts(max_label + 1, 0);
    for (auto l : labels) ++counts[l];
    const auto present = static_cast<std::size_t>(
        std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
    ClassWeights out;
    out.degenerate = present == 1;
    out.per_row.resize(labels.size());
    const double n = static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out.per_row[i] = n / (static_cast<double>(present) * static_cast<double>(counts[labels[i]]));
    }
    return out;
}

BinMapper::BinMapper(std::vector<std::vector<double>> thresholds)
    : thresholds_(std::move(thresholds)) {
    for (const auto& t : thresholds_) {
        if (t.size() > 255) throw DataError("bin mapper: more than 256 bins");
        for (std::size_t i = 1; i < t.size(); ++i) {
            if (!(t[i] > t[i - 1])) throw DataError("bin mapper: thresholds not strictly increasing");
        }
    }
}

std::uint8_t BinMapper::bin(std::size_t feature, double value) const {
    const auto& t = thresholds_[feature];
    return static_cast<std::uint8_t>(std::lower_bound(t.begin(), t.end(), value) - t.begin());
}

namespace {

double midpoint_between(double a, double b) {
    const double mid = a + (b - a) * 0.5;
    return mid >= b ? a : mid;
}

}  // namespace

BinMapper fit_bins(const FeatureMatrix& matrix, std::size_t max_bins, unsigned threads) {
    if (matrix.rows() < 2) throw DataError("fit_bins needs at least 2 rows");
    if (max_bins < 2 || max_bins > 256) throw ConfigError("max_bins must lie in [2, 256]");
    std::vector<std::vector<double>> thresholds(matrix.cols());
    parallel_for(matrix.cols(), threads, [&](std::size_t c) {
        auto values = matrix.column(c);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        const std::size_t n = values.size();
        auto& t = thresholds[c];
        if (n <= max_bins) {
            for (std::size_t i = 0; i + 1 < n; ++i) t.push_back(midpoint_between(values[i], values[i + 1]));
            return;
        }
        // Cut points at equally spaced quantiles of the distinct values.
        for (std::size_t i = 1; i < max_bins; ++i) {
            const auto j = static_cast<std::size_t>(std::llround(
                               static_cast<double>(i) * static_cast<double>(n) /
                               static_cast<double>(max_bins))) - 1;
            t.push_back(midpoint_between(values[j], values[j + 1]));
        }
    });
    return BinMapper(std::move(thresholds));
}

double Tree::predict(std::span<const double> row) const {
    std::size_t idx = 0;
    while (!nodes[idx].is_leaf()) {
        const auto& n = nodes[idx];
        idx = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold
                                           ? n.left
                                           : n.right);
    }
    return nodes[idx].value;
}

std::size_t Tree::leaves() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::vector<double> softmax(std::span<const double> scores) {
    std::vector<double> out(scores.begin(), scores.end());
    if (out.empty()) return out;
    const double peak = *std::max_element(out.begin(), out.end());
    double total = 0.0;
    for (auto& v : out) {
        v = std::exp(v - peak);
        total += v;
    }
    for (auto& v : out) v /= total;
    return out;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

Vote soft_vote(std::span<const double> first, std::span<const double> second) {
    if (first.size() != second.size() || first.empty()) {
        throw DataError("soft_vote: probability vectors differ in length");
    }
    Vote vote;
    vote.probabilities.resize(first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        vote.probabilities[i] = (first[i] + second[i]) / 2.0;
    }
    vote.predicted = argmax(vote.probabilities);
    return vote;
}

std::vector<double> BoostedEnsemble::raw_scores(std::span<const double> row) const {
    if (row.size() != feature_names.size()) {
        throw DataError("feature vector has " + std::to_string(row.size()) +
                        " columns, model expects " + std::to_string(feature_names.size()));
    }
    std::vector<double> scores = init_scores;
    const std::size_t k = classes();
    for (std::size_t t = 0; t < trees.size(); ++t) scores[t % k] += trees[t].predict(row);
    return scores;
}

std::vector<double> BoostedEnsemble::predict_proba(std::span<const double> row) const {
    return softmax(raw_scores(row));
}

std::vector<std::vector<double>> BoostedEnsemble::predict_proba(const FeatureMatrix& matrix) const {
    if (matrix.names() != feature_names) {
        throw DataError("feature columns do not match the model's training columns");
    }
    std::vector<std::vector<double>> out(matrix.rows());
    for (std::size_t r = 0; r < matrix.rows(); ++r) out[r] = predict_proba(matrix.row(r));
    return out;
}

nlohmann::json BoostedEnsemble::to_json() const {
    nlohmann::json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["kind"] = "boosted_ensemble";
    doc["labels"] = label_set.names();
    doc["feature_names"] = feature_names;
    doc["learning_rate"] = learning_rate;
    doc["config"] = config.to_json();
    doc["init_scores"] = init_scores;
    doc["bin_thresholds"] = bin_mapper.all_thresholds();
    auto& trees_json = doc["trees"] = nlohmann::json::array();
    for (const auto& tree : trees) {
        std::vector<int> feature, left, right, bin;
        std::vector<double> threshold, value;
        for (const auto& n : tree.nodes) {
            feature.push_back(n.feature);
            bin.push_back(n.bin);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            value.push_back(n.value);
        }
        trees_json.push_back({{"feature", feature},
                              {"bin", bin},
                              {"threshold", threshold},
                              {"left", left},
                              {"right", right},
                              {"value", value}});
    }
    return doc;
}

BoostedEnsemble BoostedEnsemble::from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("kind").get<std::string>() != "boosted_ensemble") {
            throw DataError("model artifact is not a boosted_ensemble");
        }
        if (doc.at("schema_version").get<int>() != kSchemaVersion) {
            throw DataError("unsupported model schema_version " + doc.at("schema_version").dump());
        }
        BoostedEnsemble e;
        e.label_set = LabelSet(doc.at("labels").get<std::vector<std::string>>());
        e.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
        e.learning_rate = doc.at("learning_rate").get<double>();
        e.config = TrainConfig::from_json(doc.at("config"), TrainConfig{});
        e.init_scores = doc.at("init_scores").get<std::vector<double>>();
        e.bin_mapper = BinMapper(doc.at("bin_thresholds").get<std::vector<std::vector<double>>>());
        if (e.init_scores.size() != e.label_set.size()) {
            throw DataError("model init_scores do not match the label count");
        }
        for (const auto& t : doc.at("trees")) {
            const auto feature = t.at("feature").get<std::vector<int>>();
            const auto bin = t.at("bin").get<std::vector<int>>();
            const auto threshold = t.at("threshold").get<std::vector<double>>();
            const auto left = t.at("left").get<std::vector<int>>();
            const auto right = t.at("right").get<std::vector<int>>();
            const auto value = t.at("value").get<std::vector<double>>();
            const std::size_t n = feature.size();
            if (bin.size() != n || threshold.size() != n || left.size() != n ||
                right.size() != n || value.size() != n || n == 0) {
                throw DataError("model tree arrays have inconsistent lengths");
            }
            Tree tree;
            for (std::size_t i = 0; i < n; ++i) {
                TreeNode node{feature[i], static_cast<std::uint16_t>(bin[i]), threshold[i],
                              left[i], right[i], value[i]};
                if (!node.is_leaf()) {
                    const auto in_range = [n](int idx) {
                        return idx > 0 && static_cast<std::size_t>(idx) < n;
                    };
                    if (!in_range(node.left) || !in_range(node.right) ||
                        static_cast<std::size_t>(node.feature) >= e.feature_names.size()) {
                        throw DataError("model tree has out-of-range node references");
                    }
                }
                tree.nodes.push_back(node);
            }
            e.trees.push_back(std::move(tree));
        }
        if (e.trees.size() % e.label_set.size() != 0) {
            throw DataError("model tree count is not a multiple of the class count");
        }
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw DataError(std::string("malformed model JSON: ") + ex.what());
    }
}

namespace detail {

void accumulate(std::span<const std::uint8_t> binned, std::size_t rows_total,
                std::span<const std::size_t> offsets, std::span<const std::uint32_t> rows,
                std::span<const double> gradients, std::span<const double> hessians,
                std::span<HistogramBin> out) {
    const std::size_t features = offsets.size() - 1;
    const std::size_t n = rows.size();
    thread_local std::vector<double> g, h;
    g.resize(n);
    h.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = gradients[rows[i]];
        h[i] = hessians[rows[i]];
    }
    for (std::size_t q = 0; q * kPack < features; ++q) {
        const std::size_t f0 = q * kPack;
        const std::size_t m = std::min(kPack, features - f0);
        for (std::size_t j = 0; j < m; ++j) {
            std::fill(out.data() + offsets[f0 + j], out.data() + offsets[f0 + j + 1], HistogramBin{});
        }
        const std::uint8_t* group = binned.data() + q * rows_total * kPack;
        if (m == kPack) {
            HistogramBin* b0 = out.data() + offsets[f0];
            HistogramBin* b1 = out.data() + offsets[f0 + 1];
            HistogramBin* b2 = out.data() + offsets[f0 + 2];
            HistogramBin* b3 = out.data() + offsets[f0 + 3];
            for (std::size_t i = 0; i < n; ++i) {
                const std::uint8_t* p = group + static_cast<std::size_t>(rows[i]) * kPack;
                const double gi = g[i], hi = h[i];
                HistogramBin& x0 = b0[p[0]];
                HistogramBin& x1 = b1[p[1]];
                HistogramBin& x2 = b2[p[2]];
                HistogramBin& x3 = b3[p[3]];
                x0.g += gi; x0.h += hi; ++x0.count;
                x1.g += gi; x1.h += hi; ++x1.count;
                x2.g += gi; x2.h += hi; ++x2.count;
                x3.g += gi; x3.h += hi; ++x3.count;
            }
        } else {
            for (std::size_t j = 0; j < m; ++j) {
                HistogramBin* bins = out.data() + offsets[f0 + j];
                for (std::size_t i = 0; i < n; ++i) {
                    HistogramBin& x = bins[group[static_cast<std::size_t>(rows[i]) * kPack + j]];
                    x.g += g[i];
                    x.h += h[i];
                    ++x.count;
                }
            }
        }
    }
}

Histogram build_histogram(std::span<const std::uint8_t> binned, std::size_t rows_total,
                          std::span<const std::size_t> offsets,
                          std::span<const std::uint32_t> rows, std::span<const double> gradients,
                          std::span<const double> hessians) {
    Histogram hist;
    hist.offsets.assign(offsets.begin(), offsets.end());
    hist.bins.resize(offsets.back());
    accumulate(binned, rows_total, offsets, rows, gradients, hessians, hist.bins);
    return hist;
}

Histogram subtract(const Histogram& parent, const Histogram& child) {
    Histogram out;
    out.offsets = parent.offsets;
    out.bins.resize(parent.bins.size());
    for (std::size_t i = 0; i < parent.bins.size(); ++i) {
        out.bins[i].g = parent.bins[i].g - child.bins[i].g;
        out.bins[i].h = parent.bins[i].h - child.bins[i].h;
        out.bins[i].count = parent.bins[i].count - child.bins[i].count;
    }
    return out;
}

void scan_feature(const HistogramBin* bins, std::size_t nbins, std::size_t feature,
                  const NodeTotals& totals, double lambda, std::size_t min_samples_leaf,
                  double min_hessian, SplitCandidate& best) {
    if (nbins < 2) return;
    const double parent_term = totals.g * totals.g / (totals.h + lambda);
    double gl = 0.0, hl = 0.0;
    std::size_t cl = 0;
    for (std::size_t b = 0; b + 1 < nbins; ++b) {
        // An empty bin repeats the previous threshold's partition.
        if (bins[b].count == 0) continue;
        gl += bins[b].g;
        hl += bins[b].h;
        cl += bins[b].count;
        if (cl < min_samples_leaf) continue;
        if (totals.count - cl < min_samples_leaf) break;
        const double hr = totals.h - hl;
        if (hl < min_hessian || hr < min_hessian) continue;
        if (hl + lambda <= 0.0 || hr + lambda <= 0.0) continue;
        const double gr = totals.g - gl;
        const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_term);
        if (gain > 0.0 && std::isfinite(gain) && (!best.valid || gain > best.gain)) {
            best = {gain, feature, b, true};
        }
    }
}

SplitCandidate best_split(const Histogram& hist, double lambda, std::size_t min_samples_leaf,
                          double min_hessian) {
    NodeTotals totals;
    if (hist.offsets.size() > 1) {
        for (std::size_t b = hist.offsets[0]; b < hist.offsets[1]; ++b) {
            totals.g += hist.bins[b].g;
            totals.h += hist.bins[b].h;
            totals.count += hist.bins[b].count;
        }
    }
    SplitCandidate best;
    for (std::size_t f = 0; f + 1 < hist.offsets.size(); ++f) {
        scan_feature(hist.bins.data() + hist.offsets[f], hist.offsets[f + 1] - hist.offsets[f], f,
                     totals, lambda, min_samples_leaf, min_hessian, best);
    }
    return best;
}

double split_gain(double gl, double hl, double gr, double hr, double lambda) {
    const double g = gl + gr;
    const double h = hl + hr;
    return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda));
}

}  // namespace detail

namespace {

using detail::Histogram;
using detail::SplitCandidate;
using detail::kPack;
using detail::packed_index;
using detail::packed_size;

struct BinnedData {
    std::size_t rows = 0;
    std::vector<std::uint8_t> values;  // column-major
    std::vector<std::size_t> offsets;
};

struct LeafRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    double value = 0.0;
};

struct GrownTree {
    Tree tree;
    std::vector<LeafRange> leaves;
};

class TreeGrower {
public:
    TreeGrower(const BinnedData& data, const BinMapper& mapper, const TrainConfig& config)
        : data_(data), mapper_(mapper), config_(config) {}

    GrownTree grow(std::span<const double> g, std::span<const double> h,
                   std::vector<std::uint32_t>& rows) {
        GrownTree out;
        std::iota(rows.begin(), rows.end(), 0u);

        std::vector<OpenLeaf> open;
        OpenLeaf root;
        root.node = 0;
        root.begin = 0;
        root.end = rows.size();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            root.g += g[i];
            root.h += h[i];
        }
        out.tree.nodes.push_back(TreeNode{});
        root.hist = acquire();
        fill(root.hist, rows, root.begin, root.end, g, h);
        evaluate(root);
        open.push_back(root);

        std::size_t leaves = 1;
        std::vector<std::uint32_t> scratch;
        while (leaves < config_.max_leaves) {
            std::size_t pick = open.size();
            for (std::size_t i = 0; i < open.size(); ++i) {
                if (!open[i].split.valid) continue;
                if (pick == open.size() || open[i].split.gain > open[pick].split.gain) pick = i;
            }
            if (pick == open.size()) break;
            OpenLeaf parent = open[pick];
            open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));

            const auto feature = parent.split.feature;
            const auto bin = parent.split.bin;
            const std::uint8_t* col = data_.values.data() + packed_index(feature, 0, data_.rows);

            // Stable partition keeps row indices ascending within each child.
            scratch.clear();
            std::size_t write = parent.begin;
            for (std::size_t i = parent.begin; i < parent.end; ++i) {
                if (col[static_cast<std::size_t>(rows[i]) * kPack] <= bin) rows[write++] = rows[i];
                else scratch.push_back(rows[i]);
            }
            std::copy(scratch.begin(), scratch.end(), rows.begin() + static_cast<std::ptrdiff_t>(write));

            OpenLeaf left, right;
            left.begin = parent.begin;
            left.end = write;
            right.begin = write;
            right.end = parent.end;
            const auto* pbins = pool_[parent.hist].data() + data_.offsets[feature];
            for (std::size_t b = 0; b <= bin; ++b) {
                left.g += pbins[b].g;
                left.h += pbins[b].h;
            }
            right.g = parent.g - left.g;
            right.h = parent.h - left.h;

            const bool left_smaller = left.end - left.begin <= right.end - right.begin;
            OpenLeaf& small = left_smaller ? left : right;
            OpenLeaf& large = left_smaller ? right : left;
            small.hist = acquire();
            fill(small.hist, rows, small.begin, small.end, g, h);
            // The larger child reuses the parent's buffer: parent - small.
            large.hist = parent.hist;

            auto& parent_node = out.tree.nodes[static_cast<std::size_t>(parent.node)];
            parent_node.feature = static_cast<std::int32_t>(feature);
            parent_node.bin = static_cast<std::uint16_t>(bin);
            parent_node.threshold = mapper_.thresholds(feature)[bin];
            left.node = static_cast<std::int32_t>(out.tree.nodes.size());
            right.node = left.node + 1;
            parent_node.left = left.node;
            parent_node.right = right.node;
            out.tree.nodes.push_back(TreeNode{});
            out.tree.nodes.push_back(TreeNode{});

            const bool scan_small = splittable(small);
            const bool scan_large = splittable(large);
            auto& lb = pool_[large.hist];
            const auto& sb = pool_[small.hist];
            const auto small_totals = totals(small);
            const auto large_totals = totals(large);
            for (std::size_t f = 0; f + 1 < data_.offsets.size(); ++f) {
                const std::size_t lo = data_.offsets[f], hi = data_.offsets[f + 1];
                for (std::size_t i = lo; i < hi; ++i) {
                    lb[i].g -= sb[i].g;
                    lb[i].h -= sb[i].h;
                    lb[i].count -= sb[i].count;
                }
                if (scan_small) scan(sb, f, small_totals, small.split);
                if (scan_large) scan(lb, f, large_totals, large.split);
            }
            if (!small.split.valid) release(small);
            if (!large.split.valid) release(large);

            open.push_back(left);
            open.push_back(right);
            ++leaves;
        }

        std::sort(open.begin(), open.end(),
                  [](const OpenLeaf& a, const OpenLeaf& b) { return a.node < b.node; });
        for (auto& leaf : open) {
            release(leaf);
            const double denom = leaf.h + config_.l2_regularization;
            const double value = denom > 0.0 ? -leaf.g / denom * config_.learning_rate : 0.0;
            out.tree.nodes[static_cast<std::size_t>(leaf.node)].value = value;
            out.leaves.push_back({leaf.begin, leaf.end, value});
        }
        return out;
    }

private:
    static constexpr std::size_t kNoHist = static_cast<std::size_t>(-1);

    struct OpenLeaf {
        std::int32_t node = 0;
        std::size_t begin = 0;
        std::size_t end = 0;
        double g = 0.0;
        double h = 0.0;
        std::size_t hist = kNoHist;  // index into the buffer pool
        SplitCandidate split;
    };

    std::size_t acquire() {
        if (!free_.empty()) {
            const auto id = free_.back();
            free_.pop_back();
            return id;
        }
        pool_.emplace_back(data_.offsets.back());
        return pool_.size() - 1;
    }

    void release(OpenLeaf& leaf) {
        if (leaf.hist != kNoHist) free_.push_back(leaf.hist);
        leaf.hist = kNoHist;
    }

    void fill(std::size_t id, const std::vector<std::uint32_t>& rows, std::size_t begin,
              std::size_t end, std::span<const double> g, std::span<const double> h) {
        detail::accumulate(data_.values, data_.rows, data_.offsets,
                           std::span<const std::uint32_t>(rows.data() + begin, end - begin), g, h,
                           pool_[id]);
    }

    bool splittable(const OpenLeaf& leaf) const {
        return leaf.end - leaf.begin >= 2 * config_.min_samples_leaf &&
               leaf.h >= config_.min_hessian_to_split;
    }

    static detail::NodeTotals totals(const OpenLeaf& leaf) {
        return {leaf.g, leaf.h, leaf.end - leaf.begin};
    }

    void scan(const std::vector<detail::HistogramBin>& bins, std::size_t f,
              const detail::NodeTotals& t, SplitCandidate& best) const {
        detail::scan_feature(bins.data() + data_.offsets[f], data_.offsets[f + 1] - data_.offsets[f], f,
                             t, config_.l2_regularization, config_.min_samples_leaf,
                             config_.min_hessian_to_split, best);
    }

    void evaluate(OpenLeaf& leaf) {
        if (splittable(leaf)) {
            const auto t = totals(leaf);
            for (std::size_t f = 0; f + 1 < data_.offsets.size(); ++f) scan(pool_[leaf.hist], f, t, leaf.split);
        }
        if (!leaf.split.valid) release(leaf);
    }

    const BinnedData& data_;
    const BinMapper& mapper_;
    const TrainConfig& config_;
    std::vector<std::vector<detail::HistogramBin>> pool_;
    std::vector<std::size_t> free_;
};

constexpr double kAbsentClassPrior = 1e-15;

double weighted_log_loss(std::span<const double> probs, std::span<const std::size_t> labels,
                         std::span<const double> weights, std::size_t k) {
    double loss = 0.0;
    double total = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const double p = std::max(probs[r * k + labels[r]], std::numeric_limits<double>::min());
        loss -= weights[r] * std::log(p);
        total += weights[r];
    }
    return loss / total;
}

}  // namespace

BoostedEnsemble train_gbdt(const FeatureMatrix& matrix, std::span<const std::size_t> labels,
                           const LabelSet& label_set, const TrainConfig& config,
                           TrainTrace* trace) {
    config.validate();
    const std::size_t n = matrix.rows();
    const std::size_t k = label_set.size();
    if (labels.size() != n) throw DataError("train_gbdt: label count does not match rows");
    if (n < 2 * config.min_samples_leaf) {
        throw DataError("train_gbdt: need at least 2 * min_samples_leaf rows");
    }
    std::vector<std::size_t> class_counts(k, 0);
    for (auto l : labels) {
        if (l >= k) throw DataError("train_gbdt: label index outside the label set");
        ++class_counts[l];
    }
    const auto present = std::count_if(class_counts.begin(), class_counts.end(),
                                       [](std::size_t c) { return c > 0; });
    if (present < 2) throw DataError("train_gbdt: need at least 2 classes present");
    for (std::size_t r = 0; r < n; ++r) {
        for (double v : matrix.row(r)) {
            if (!std::isfinite(v)) throw DataError("train_gbdt: non-finite feature value");
        }
    }

    std::vector<double> weights(n, 1.0);
    if (config.class_weighting == ClassWeighting::Balanced) {
        auto cw = balanced_weights(labels);
        weights = std::move(cw.per_row);
        if (trace) trace->degenerate_weights = cw.degenerate;
    }

    BoostedEnsemble model;
    model.label_set = label_set;
    model.feature_names = matrix.names();
    model.learning_rate = config.learning_rate;
    model.config = config;
    model.bin_mapper = fit_bins(matrix, config.max_bins, config.threads);

    BinnedData data;
    data.rows = n;
    data.values.resize(packed_size(matrix.cols(), n));
    data.offsets.resize(matrix.cols() + 1, 0);
    for (std::size_t f = 0; f < matrix.cols(); ++f) {
        data.offsets[f + 1] = data.offsets[f] + model.bin_mapper.bins(f);
    }
    parallel_for(matrix.cols(), config.threads, [&](std::size_t f) {
        for (std::size_t r = 0; r < n; ++r) {
            data.values[packed_index(f, r, n)] = model.bin_mapper.bin(f, matrix.at(r, f));
        }
    });

    std::vector<double> class_weight(k, 0.0);
    double weight_total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        class_weight[labels[r]] += weights[r];
        weight_total += weights[r];
    }
    model.init_scores.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        const double prior = class_weight[c] / weight_total;
        model.init_scores[c] = std::log(class_counts[c] > 0 ? prior : kAbsentClassPrior);
    }

    std::vector<double> scores(n * k);
    for (std::size_t r = 0; r < n; ++r) {
        std::copy(model.init_scores.begin(), model.init_scores.end(), scores.begin() + static_cast<std::ptrdiff_t>(r * k));
    }
    std::vector<double> probs(n * k);
    auto refresh_probs = [&] {
        for (std::size_t r = 0; r < n; ++r) {
            auto p = softmax(std::span<const double>(scores.data() + r * k, k));
            std::copy(p.begin(), p.end(), probs.begin() + static_cast<std::ptrdiff_t>(r * k));
        }
    };

    refresh_probs();
    if (trace) trace->loss.push_back(weighted_log_loss(probs, labels, weights, k));

    model.trees.reserve(config.iterations * k);
    std::vector<GrownTree> grown(k);
    // One grower per class so histogram buffers are reused across iterations.
    std::vector<TreeGrower> growers;
    growers.reserve(k);
    for (std::size_t c = 0; c < k; ++c) growers.emplace_back(data, model.bin_mapper, config);
    for (std::size_t it = 0; it < config.iterations; ++it) {
        parallel_for(k, config.threads, [&](std::size_t c) {
            if (class_counts[c] == 0) {
                grown[c] = GrownTree{};
                grown[c].tree.nodes.push_back(TreeNode{});
                return;
            }
            std::vector<double> g(n), h(n);
            for (std::size_t r = 0; r < n; ++r) {
                const double p = probs[r * k + c];
                const double y = labels[r] == c ? 1.0 : 0.0;
                g[r] = weights[r] * (p - y);
                h[r] = weights[r] * p * (1.0 - p);
            }
            std::vector<std::uint32_t> rows(n);
            auto tree = growers[c].grow(g, h, rows);
            // Translate leaf row ranges into explicit row lists for the update.
            grown[c].tree = std::move(tree.tree);
            grown[c].leaves.clear();
            std::vector<double> delta(n, 0.0);
            for (const auto& leaf : tree.leaves) {
                for (std::size_t i = leaf.begin; i < leaf.end; ++i) delta[rows[i]] = leaf.value;
            }
            for (std::size_t r = 0; r < n; ++r) scores[r * k + c] += delta[r];
        });
        for (auto& gt : grown) model.trees.push_back(std::move(gt.tree));
        refresh_probs();
        if (trace) trace->loss.push_back(weighted_log_loss(probs, labels, weights, k));
    }
    return model;
}

}  // namespace exrec::boost
