#include "exrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "exrec/csv.hpp"
#include "exrec/features.hpp"

namespace exrec::eval {

FoldPlan group_kfold(std::vector<std::string> subjects, std::size_t k, std::uint64_t seed) {
    std::sort(subjects.begin(), subjects.end());
    subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
    if (k < 2) throw ConfigError("group k-fold needs k >= 2");
    if (subjects.size() < k) {
        throw DataError("group k-fold: " + std::to_string(subjects.size()) +
                        " subjects cannot fill " + std::to_string(k) + " folds");
    }
    // Fisher-Yates on raw engine output keeps the permutation identical
    // across standard library implementations.
    std::mt19937_64 rng(seed);
    for (std::size_t i = subjects.size() - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(subjects[i], subjects[j]);
    }
    FoldPlan plan;
    plan.validation.resize(k);
    plan.training.resize(k);
    for (std::size_t i = 0; i < subjects.size(); ++i) plan.validation[i % k].push_back(subjects[i]);
    for (std::size_t f = 0; f < k; ++f) {
        for (std::size_t g = 0; g < k; ++g) {
            if (g == f) continue;
            plan.training[f].insert(plan.training[f].end(), plan.validation[g].begin(),
                                    plan.validation[g].end());
        }
        std::sort(plan.training[f].begin(), plan.training[f].end());
    }
    return plan;
}

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truth,
                                 std::span<const std::size_t> pred, std::size_t classes) {
    if (truth.size() != pred.size()) throw DataError("confusion matrix: length mismatch");
    ConfusionMatrix m(classes, std::vector<std::size_t>(classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= classes || pred[i] >= classes) {
            throw DataError("confusion matrix: label outside the label set");
        }
        ++m[truth[i]][pred[i]];
    }
    return m;
}

double macro_f1(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                std::size_t classes) {
    const auto m = confusion_matrix(truth, pred, classes);
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t row = 0, col = 0;
        for (std::size_t j = 0; j < classes; ++j) {
            row += m[c][j];
            col += m[j][c];
        }
        if (row == 0 && col == 0) continue;
        const double tp = static_cast<double>(m[c][c]);
        const double fn = static_cast<double>(row) - tp;
        const double fp = static_cast<double>(col) - tp;
        const double denom = 2.0 * tp + fp + fn;
        total += denom > 0.0 ? 2.0 * tp / denom : 0.0;
        ++counted;
    }
    return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json policy_json = nlohmann::json::array();
    for (auto p : policy) policy_json.push_back(to_string(p));
    return {
        {"rate_hz", rate_hz},
        {"augmentation", policy_json},
        {"n_quantiles", n_quantiles},
        {"booster_balanced", balanced.to_json()},
        {"booster_regularized", regularized.to_json()},
        {"folds", folds},
        {"seed", seed},
    };
}

BoxStats box_stats(std::vector<double> values) {
    BoxStats st;
    st.count = values.size();
    std::vector<double> finite;
    for (double v : values) {
        if (std::isfinite(v)) finite.push_back(v);
        else ++st.infinite;
    }
    if (finite.empty()) return st;
    std::sort(finite.begin(), finite.end());
    auto q = [&](double p) {
        const double pos = p * static_cast<double>(finite.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, finite.size() - 1);
        return finite[lo] + (finite[hi] - finite[lo]) * (pos - static_cast<double>(lo));
    };
    st.min = finite.front();
    st.q1 = q(0.25);
    st.median = q(0.5);
    st.q3 = q(0.75);
    st.max = finite.back();
    return st;
}

namespace {

nlohmann::json score_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
    nlohmann::ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["tool_version"] = kToolVersion;
    doc["limb"] = to_string(limb);
    doc["labels"] = label_set.names();
    auto& folds_json = doc["folds"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < folds.size(); ++i) {
        const auto& f = folds[i];
        folds_json.push_back({
            {"fold", i},
            {"validation_subjects", f.validation_subjects},
            {"training_subjects", f.training_subjects},
            {"training_rows", f.training_rows},
            {"validation_rows", f.validation_rows},
            {"macro_f1", f.macro_f1},
            {"macro_f1_balanced_booster", f.macro_f1_balanced},
            {"macro_f1_regularized_booster", f.macro_f1_regularized},
            {"confusion_matrix", f.confusion},
        });
    }
    doc["aggregate"] = {{"macro_f1_mean", mean_f1}, {"macro_f1_std", std_f1}};

    nlohmann::ordered_json by_feature = nlohmann::ordered_json::object();
    std::vector<std::vector<double>> by_group(3);
    for (std::size_t c = 0; c < anova.size(); ++c) {
        by_feature[feature_names[c]] = score_json(anova[c]);
        by_group[static_cast<std::size_t>(features::column_info(c).group)].push_back(anova[c]);
    }
    nlohmann::ordered_json groups = nlohmann::ordered_json::object();
    if (!anova.empty()) {
        for (std::size_t g = 0; g < 3; ++g) {
            const auto st = box_stats(by_group[g]);
            groups[std::string(features::to_string(static_cast<features::FeatureGroup>(g)))] = {
                {"count", st.count}, {"infinite", st.infinite}, {"min", st.min},
                {"q1", st.q1},       {"median", st.median},     {"q3", st.q3},
                {"max", st.max},
            };
        }
    }
    doc["anova_f_scores"] = {{"by_feature", by_feature}, {"by_group", groups}};
    doc["config"] = config;
    return nlohmann::json::parse(doc.dump());
}

void EvalReport::write_confusion_csv(std::ostream& out) const {
    out << "# schema_version=" << kSchemaVersion << "\n";
    out << "fold,truth";
    for (const auto& name : label_set.names()) out << ',' << csv::escape(name);
    out << "\n";
    const std::size_t k = label_set.size();
    ConfusionMatrix total(k, std::vector<std::size_t>(k, 0));
    auto emit = [&](const std::string& fold, const ConfusionMatrix& m) {
        for (std::size_t t = 0; t < k; ++t) {
            out << fold << ',' << csv::escape(label_set.name(t));
            for (std::size_t p = 0; p < k; ++p) out << ',' << m[t][p];
            out << "\n";
        }
    };
    for (std::size_t i = 0; i < folds.size(); ++i) {
        emit(std::to_string(i), folds[i].confusion);
        for (std::size_t t = 0; t < k; ++t) {
            for (std::size_t p = 0; p < k; ++p) total[t][p] += folds[i].confusion[t][p];
        }
    }
    emit("all", total);
}

void EvalReport::write_fscore_box_csv(std::ostream& out) const {
    out << "# schema_version=" << kSchemaVersion << "\n";
    out << "group,count,infinite,min,q1,median,q3,max\n";
    if (anova.empty()) return;
    std::vector<std::vector<double>> by_group(3);
    for (std::size_t c = 0; c < anova.size(); ++c) {
        by_group[static_cast<std::size_t>(features::column_info(c).group)].push_back(anova[c]);
    }
    for (std::size_t g = 0; g < 3; ++g) {
        const auto st = box_stats(by_group[g]);
        out << features::to_string(static_cast<features::FeatureGroup>(g)) << ',' << st.count << ','
            << st.infinite << ',' << csv::format_double(st.min) << ','
            << csv::format_double(st.q1) << ',' << csv::format_double(st.median) << ','
            << csv::format_double(st.q3) << ',' << csv::format_double(st.max) << "\n";
    }
}

namespace {

std::vector<std::size_t> predict_classes(const std::vector<std::vector<double>>& probs) {
    std::vector<std::size_t> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) out[i] = boost::argmax(probs[i]);
    return out;
}

}  // namespace

EvalReport run_cv(const ingest::WindowedDataset& dataset, Limb limb, const PipelineConfig& config) {
    augment::validate_policy(config.policy);
    const auto fused = ingest::fuse_sides(dataset, limb);
    const std::size_t k_classes = fused.label_set.size();

    std::vector<std::string> subjects;
    for (const auto& w : fused.windows) subjects.push_back(w.meta.subject);
    const auto plan = group_kfold(subjects, config.folds, config.seed);

    // Features depend only on the window, so every variant is extracted once
    // and folds select their rows: block 0 holds originals, block b the b-th
    // policy entry.
    const auto augmented = augment::augment_dataset(fused, config.policy);
    const auto all_features =
        features::extract_matrix(augmented.windows, config.rate_hz, config.threads);
    const std::size_t originals = fused.windows.size();
    const std::size_t blocks = 1 + config.policy.size();

    EvalReport report;
    report.limb = limb;
    report.label_set = fused.label_set;
    report.feature_names = all_features.names();
    report.config = config.to_json();
    report.config["limb"] = to_string(limb);

    {
        std::vector<std::size_t> original_rows(originals);
        std::iota(original_rows.begin(), original_rows.end(), std::size_t{0});
        const auto original_matrix = all_features.select(original_rows);
        const auto labels = original_matrix.labels();
        std::set<std::size_t> distinct(labels.begin(), labels.end());
        if (distinct.size() >= 2 && labels.size() > distinct.size()) {
            report.anova = features::anova_f_scores(original_matrix, labels);
        }
    }

    for (std::size_t f = 0; f < plan.folds(); ++f) {
        const std::set<std::string> train_set(plan.training[f].begin(), plan.training[f].end());
        const std::set<std::string> val_set(plan.validation[f].begin(), plan.validation[f].end());

        std::vector<std::size_t> train_rows;
        std::vector<std::size_t> val_rows;
        for (std::size_t b = 0; b < blocks; ++b) {
            for (std::size_t i = 0; i < originals; ++i) {
                const auto& subject = fused.windows[i].meta.subject;
                if (train_set.count(subject)) train_rows.push_back(b * originals + i);
                else if (b == 0 && val_set.count(subject)) val_rows.push_back(i);
            }
        }
        for (auto r : train_rows) {
            if (val_set.count(all_features.meta(r).subject)) {
                throw InvariantError("validation subject leaked into training rows");
            }
        }
        for (auto r : val_rows) {
            if (all_features.meta(r).provenance != Provenance::Original) {
                throw InvariantError("augmented window in validation rows");
            }
        }
        if (val_rows.empty()) throw DataError("fold " + std::to_string(f) + " has no validation windows");

        const auto train_raw = all_features.select(train_rows);
        const auto val_raw = all_features.select(val_rows);
        const auto qmap = normalize::fit_quantile(train_raw, config.n_quantiles, config.threads);
        const auto train_x = normalize::transform(qmap, train_raw);
        const auto val_x = normalize::transform(qmap, val_raw);
        const auto train_y = train_x.labels();
        const auto val_y = val_x.labels();

        auto cfg_b = config.balanced;
        auto cfg_r = config.regularized;
        cfg_b.threads = cfg_r.threads = config.threads;
        const auto model_b = boost::train_gbdt(train_x, train_y, fused.label_set, cfg_b);
        const auto model_r = boost::train_gbdt(train_x, train_y, fused.label_set, cfg_r);
        const auto probs_b = model_b.predict_proba(val_x);
        const auto probs_r = model_r.predict_proba(val_x);

        std::vector<std::size_t> voted(val_rows.size());
        for (std::size_t i = 0; i < val_rows.size(); ++i) {
            voted[i] = boost::soft_vote(probs_b[i], probs_r[i]).predicted;
        }

        FoldResult result;
        result.validation_subjects = plan.validation[f];
        result.training_subjects = plan.training[f];
        result.training_rows = train_rows.size();
        result.validation_rows = val_rows.size();
        result.macro_f1 = macro_f1(val_y, voted, k_classes);
        result.macro_f1_balanced = macro_f1(val_y, predict_classes(probs_b), k_classes);
        result.macro_f1_regularized = macro_f1(val_y, predict_classes(probs_r), k_classes);
        result.confusion = confusion_matrix(val_y, voted, k_classes);
        report.folds.push_back(std::move(result));
    }

    double sum = 0.0;
    for (const auto& f : report.folds) sum += f.macro_f1;
    report.mean_f1 = sum / static_cast<double>(report.folds.size());
    double sq = 0.0;
    for (const auto& f : report.folds) sq += (f.macro_f1 - report.mean_f1) * (f.macro_f1 - report.mean_f1);
    report.std_f1 = std::sqrt(sq / static_cast<double>(report.folds.size()));
    return report;
}

LabelSet synth_label_set(std::size_t classes) {
    if (classes < 2) throw ConfigError("synthetic data needs at least 2 classes (Null + 1)");
    std::vector<std::string> names{std::string(kNullLabel)};
    for (std::size_t c = 1; c < classes; ++c) names.push_back("activity_" + std::to_string(c));
    return LabelSet(std::move(names));
}

namespace {

struct Vec3 {
    double x, y, z;
};

Vec3 normalized(Vec3 v) {
    const double n = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    return {v.x / n, v.y / n, v.z / n};
}

struct Signature {
    Vec3 gravity;
    Vec3 primary;
    Vec3 secondary;
    double frequency;
    double amplitude;
};

Signature class_signature(std::size_t c, Limb limb) {
    const double limb_shift = limb == Limb::Arm ? 0.0 : 0.35;
    const double cd = static_cast<double>(c);
    if (c == 0) {
        return {normalized({0.15, 0.2, 0.97}), {1, 0, 0}, {0, 1, 0}, 0.0, 0.0};
    }
    const double angle = 1.3 * cd + limb_shift;
    return {
        normalized({0.3 * std::cos(angle), 0.3 * std::sin(angle), 1.0 - 0.25 * cd}),
        normalized({std::cos(angle), std::sin(angle), 0.4 + 0.2 * cd}),
        normalized({-std::sin(angle), std::cos(angle), 0.3}),
        0.9 + 0.85 * cd + limb_shift,
        0.45 + 0.4 * cd,
    };
}

}  // namespace

std::vector<ingest::SensorStream> synth_generate(const SynthConfig& config) {
    if (config.subjects == 0) throw ConfigError("synthetic data needs at least 1 subject");
    const auto labels = synth_label_set(config.classes);
    const auto per_class = static_cast<std::size_t>(std::llround(config.seconds_per_class * config.rate_hz));
    if (per_class == 0) throw ConfigError("seconds_per_class x rate must be at least one sample");

    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const int width = config.subjects >= 100 ? 3 : 2;

    std::vector<ingest::SensorStream> out;
    for (std::size_t s = 0; s < config.subjects; ++s) {
        std::string id = std::to_string(s + 1);
        id = "S" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(id.size()))), '0') + id;

        for (const auto& pos : ingest::ColumnMap::default_positions()) {
            ingest::SensorStream stream;
            stream.subject = id;
            stream.limb = pos.limb;
            stream.side = pos.side;
            stream.samples.reserve(per_class * config.classes);
            stream.labels.reserve(per_class * config.classes);
            std::size_t sample_index = 0;
            for (std::size_t c = 0; c < config.classes; ++c) {
                const auto sig = class_signature(c, pos.limb);
                const double amp_jitter = 0.85 + 0.3 * unit(rng);
                const double freq_jitter = 0.95 + 0.1 * unit(rng);
                const double phase = 2.0 * std::numbers::pi * unit(rng);
                const double phase2 = 2.0 * std::numbers::pi * unit(rng);
                const double noise_level = c == 0 ? 0.03 : 0.05;
                for (std::size_t i = 0; i < per_class; ++i, ++sample_index) {
                    const double t = static_cast<double>(sample_index) / config.rate_hz;
                    const double w = 2.0 * std::numbers::pi * sig.frequency * freq_jitter * t;
                    const double a1 = sig.amplitude * amp_jitter * std::sin(w + phase);
                    const double a2 = 0.3 * sig.amplitude * amp_jitter * std::sin(2.0 * w + phase2);
                    TriaxialSample smp;
                    smp.t = t;
                    smp.ax = sig.gravity.x + a1 * sig.primary.x + a2 * sig.secondary.x + noise_level * noise(rng);
                    smp.ay = sig.gravity.y + a1 * sig.primary.y + a2 * sig.secondary.y + noise_level * noise(rng);
                    smp.az = sig.gravity.z + a1 * sig.primary.z + a2 * sig.secondary.z + noise_level * noise(rng);
                    // The contralateral sensor sees the mirror image.
                    if (pos.side == Side::Left) {
                        if (pos.limb == Limb::Arm) smp.ax = -smp.ax;
                        else smp.ay = -smp.ay;
                    }
                    stream.samples.push_back(smp);
                    stream.labels.push_back(labels.name(c));
                }
            }
            out.push_back(std::move(stream));
        }
    }
    return out;
}

}  // namespace exrec::eval
