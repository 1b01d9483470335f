#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "exrec/eval.hpp"

using namespace exrec;
using namespace exrec::eval;

namespace {

// Per-class F1 counted pair by pair, averaged over classes seen in either list.
double macro_f1_oracle(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred,
                       std::size_t classes) {
    double sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] == c && pred[i] == c) ++tp;
            if (truth[i] != c && pred[i] == c) ++fp;
            if (truth[i] == c && pred[i] != c) ++fn;
        }
        if (tp + fp + fn == 0) continue;
        ++seen;
        sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }
    return seen == 0 ? 0.0 : sum / static_cast<double>(seen);
}

std::vector<std::string> subject_names(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("S" + std::to_string(100 + i));
    return out;
}

}  // namespace

TEST_CASE("group k-fold sizes") {
    auto plan = group_kfold(subject_names(10), 5, 0);
    REQUIRE(plan.folds() == 5);
    for (const auto& v : plan.validation) CHECK(v.size() == 2);
    auto uneven = group_kfold(subject_names(22), 5, 3);
    std::vector<std::size_t> sizes;
    for (const auto& v : uneven.validation) sizes.push_back(v.size());
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{4, 4, 4, 5, 5});
    CHECK_THROWS_AS(group_kfold(subject_names(3), 5, 0), DataError);
    CHECK_THROWS_AS(group_kfold(subject_names(3), 1, 0), ConfigError);
}

TEST_CASE("group k-fold partitions subjects") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t n = 5 + seed % 13;
        auto names = subject_names(n);
        std::vector<std::string> repeated = names;
        repeated.insert(repeated.end(), names.begin(), names.end());
        auto plan = group_kfold(repeated, 5, seed);
        std::multiset<std::string> all_val;
        for (std::size_t f = 0; f < plan.folds(); ++f) {
            all_val.insert(plan.validation[f].begin(), plan.validation[f].end());
            std::set<std::string> v(plan.validation[f].begin(), plan.validation[f].end());
            std::set<std::string> t(plan.training[f].begin(), plan.training[f].end());
            CHECK(v.size() + t.size() == n);
            for (const auto& s : v) CHECK(t.count(s) == 0);
        }
        CHECK(all_val == std::multiset<std::string>(names.begin(), names.end()));
    }
    CHECK(group_kfold(subject_names(12), 5, 9).validation ==
          group_kfold(subject_names(12), 5, 9).validation);
}

TEST_CASE("macro F1 examples") {
    const std::vector<std::size_t> truth{0, 0, 1, 1};
    CHECK(macro_f1(truth, truth, 3) == 1.0);
    CHECK(macro_f1(truth, std::vector<std::size_t>{1, 1, 0, 0}, 3) == 0.0);
    CHECK(macro_f1(truth, std::vector<std::size_t>{0, 1, 0, 1}, 3) == doctest::Approx(0.5));
    CHECK_THROWS_AS(macro_f1(truth, std::vector<std::size_t>{0}, 3), DataError);
}

TEST_CASE("macro F1 agrees with a pairwise count") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = 2 + rng() % 18;
        const std::size_t n = 1 + rng() % 60;
        std::vector<std::size_t> truth(n), pred(n);
        for (auto& v : truth) v = rng() % k;
        for (auto& v : pred) v = rng() % k;
        CHECK(macro_f1(truth, pred, k) == doctest::Approx(macro_f1_oracle(truth, pred, k)).epsilon(1e-12));
    }
}

TEST_CASE("confusion matrix counts every pair once") {
    const std::vector<std::size_t> truth{0, 1, 2, 2, 1};
    const std::vector<std::size_t> pred{0, 2, 2, 1, 1};
    auto cm = confusion_matrix(truth, pred, 3);
    CHECK(cm[0][0] == 1);
    CHECK(cm[1][2] == 1);
    CHECK(cm[2][1] == 1);
    std::size_t total = 0;
    for (const auto& row : cm) for (auto v : row) total += v;
    CHECK(total == truth.size());
}

TEST_CASE("box stats ignore infinities") {
    auto b = box_stats({1, 2, 3, 4, 5, std::numeric_limits<double>::infinity()});
    CHECK(b.count == 6);
    CHECK(b.infinite == 1);
    CHECK(b.min == 1);
    CHECK(b.median == 3);
    CHECK(b.max == 5);
}

TEST_CASE("synthetic generator") {
    SynthConfig cfg;
    cfg.subjects = 2;
    cfg.classes = 4;
    cfg.seconds_per_class = 60;
    cfg.seed = 5;
    auto a = synth_generate(cfg);
    REQUIRE(a.size() == 8);
    for (const auto& s : a) CHECK(s.samples.size() == 12000);
    auto b = synth_generate(cfg);
    CHECK(a[3].samples[100].ax == b[3].samples[100].ax);
    cfg.seed = 6;
    auto c = synth_generate(cfg);
    CHECK(a[3].samples[100].ax != c[3].samples[100].ax);
    auto labels = synth_label_set(4);
    CHECK(labels.name(0) == "null");
    CHECK(ingest::infer_label_set(a).names() == labels.names());
}

namespace {

ingest::WindowedDataset small_synthetic(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.subjects = 5;
    cfg.classes = 3;
    cfg.seconds_per_class = 12;
    cfg.seed = seed;
    return ingest::build_dataset(synth_generate(cfg), synth_label_set(3), ingest::WindowingConfig{});
}

PipelineConfig quick_config() {
    PipelineConfig cfg;
    cfg.balanced.iterations = 10;
    cfg.regularized.iterations = 10;
    cfg.seed = 1;
    return cfg;
}

}  // namespace

TEST_CASE("cross-validation on a small synthetic set") {
    auto ds = small_synthetic(2);
    auto cfg = quick_config();
    auto report = run_cv(ds, Limb::Leg, cfg);
    REQUIRE(report.folds.size() == 5);
    std::size_t validated = 0;
    for (const auto& f : report.folds) {
        validated += f.validation_rows;
        CHECK(f.macro_f1 >= 0.0);
        CHECK(f.macro_f1 <= 1.0);
        for (const auto& s : f.validation_subjects) {
            CHECK(std::find(f.training_subjects.begin(), f.training_subjects.end(), s) ==
                  f.training_subjects.end());
        }
        // training = 4 subjects x 2 sides x 36 windows x 3 variants
        CHECK(f.training_rows == 3 * f.validation_rows * 4);
    }
    CHECK(validated == ingest::fuse_sides(ds, Limb::Leg).windows.size());
    CHECK(report.anova.size() == 450);
    CHECK(report.mean_f1 > 0.8);

    cfg.threads = 3;
    auto again = run_cv(ds, Limb::Leg, cfg);
    CHECK(again.to_json()["folds"] == report.to_json()["folds"]);

    std::ostringstream cm, box;
    report.write_confusion_csv(cm);
    report.write_fscore_box_csv(box);
    CHECK(cm.str().rfind("# schema_version=1", 0) == 0);
    CHECK(box.str().find("statistical_temporal") != std::string::npos);
}

TEST_CASE("cross-validation without augmentation") {
    auto cfg = quick_config();
    cfg.policy.clear();
    auto report = run_cv(small_synthetic(3), Limb::Arm, cfg);
    for (const auto& f : report.folds) CHECK(f.training_rows == f.validation_rows * 4);
}
