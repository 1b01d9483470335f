#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "exrec/cli.hpp"
#include "exrec/csv.hpp"
#include "exrec/features.hpp"

using namespace exrec;
using namespace exrec::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("exrec_test_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        rows.push_back(csv::split_line(line));
    }
    return rows;
}

// One subject, Null plus one activity, 25 s each: 50 windows per side.
RunConfig small_config(const fs::path& root) {
    RunConfig c;
    c.seed = 11;
    c.synth.subjects = 1;
    c.synth.classes = 2;
    c.synth.seconds_per_class = 25;
    c.balanced.iterations = 5;
    c.regularized.iterations = 5;
    c.output_dir = root / "data";
    return c;
}

}  // namespace

TEST_CASE("config parsing and overrides") {
    auto doc = nlohmann::json::parse(R"({"seed": 4, "limb": "leg", "inputs": ["a.csv"], "output_dir": "out",
        "booster_balanced": {"iterations": 7}, "normalization": {"n_quantiles": 50}})");
    auto c = RunConfig::from_json(doc, "/base");
    CHECK(*c.seed == 4);
    CHECK(c.limbs == std::vector<Limb>{Limb::Leg});
    CHECK(c.inputs.front() == fs::path("/base/a.csv"));
    CHECK(c.output_dir == fs::path("/base/out"));
    CHECK(c.balanced.iterations == 7);
    CHECK(c.regularized.iterations == 100);
    CHECK(c.n_quantiles == 50);

    CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"sede": 1})"), ""), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"limb": "torso"})"), ""), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"booster_regularized": {"depth": 3}})"), ""),
                    ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"seed": "x"})"), ""), ConfigError);

    TempDir dir("config");
    std::ofstream(dir.path / "run.json") << R"({"seed": 4, "threads": 2, "augmentation": ["Rotated"]})";
    Overrides o;
    o.seed = 9;
    o.no_augment = true;
    o.limb = "arm";
    auto merged = load_config(dir.path / "run.json", o);
    CHECK(*merged.seed == 9);
    CHECK(merged.threads == 2);
    CHECK(merged.policy.empty());
    CHECK(merged.limbs == std::vector<Limb>{Limb::Arm});
    CHECK_THROWS_AS(load_config(dir.path / "missing.json", {}), ConfigError);
}

TEST_CASE("validation requires a seed and existing paths") {
    RunConfig c;
    CHECK_THROWS_AS(c.validate(Command::Synth), ConfigError);
    c.seed = 1;
    c.validate(Command::Synth);
    CHECK_THROWS_AS(c.validate(Command::Extract), ConfigError);
    c.inputs = {"/definitely/not/here.csv"};
    CHECK_THROWS_AS(c.validate(Command::Extract), ConfigError);
    c.synth.subjects = 0;
    CHECK_THROWS_AS(c.validate(Command::Synth), ConfigError);
}

TEST_CASE("synth writes one reproducible file per subject") {
    TempDir dir("synth");
    auto c = small_config(dir.path);
    c.synth.subjects = 3;
    std::ostringstream log;
    run_synth(c, log);
    CHECK(fs::exists(c.output_dir / "S01.csv"));
    CHECK(fs::exists(c.output_dir / "S03.csv"));
    CHECK(log.str().find("activity_1,3750") != std::string::npos);
    const auto first = slurp(c.output_dir / "S02.csv");
    CHECK(first.rfind("# schema_version=1", 0) == 0);
    run_synth(c, log);
    CHECK(slurp(c.output_dir / "S02.csv") == first);
}

TEST_CASE("extract counts rows with and without augmentation") {
    TempDir dir("extract");
    auto c = small_config(dir.path);
    std::ostringstream log;
    run_synth(c, log);
    c.inputs = {c.output_dir};
    c.limbs = {Limb::Arm};
    c.output_dir = dir.path / "aug";
    run_extract(c, log);
    auto rows = read_csv_rows(c.output_dir / "features_arm.csv");
    CHECK(rows.size() == 301);
    CHECK(rows.front().size() == 5 + 450);
    CHECK(fs::exists(c.output_dir / "feature_catalog.json"));

    c.policy.clear();
    c.output_dir = dir.path / "plain";
    run_extract(c, log);
    CHECK(read_csv_rows(c.output_dir / "features_arm.csv").size() == 101);
}

TEST_CASE("train then predict reproduces in-sample probabilities") {
    TempDir dir("train");
    auto c = small_config(dir.path);
    std::ostringstream log;
    run_synth(c, log);
    c.inputs = {c.output_dir};
    c.limbs = {Limb::Leg};
    c.policy.clear();
    c.output_dir = dir.path / "model";
    run_train(c, log);
    const auto model_path = c.output_dir / "model_leg.json";
    const auto model = LimbModel::from_json(nlohmann::json::parse(slurp(model_path)));
    CHECK(model.limb == Limb::Leg);
    CHECK(LimbModel::from_json(model.to_json()).to_json() == model.to_json());

    c.model = model_path;
    c.output_dir = dir.path / "pred";
    run_predict(c, log);
    const auto rows = read_csv_rows(c.output_dir / "predictions_leg.csv");
    REQUIRE(rows.size() == 101);

    // Recompute the same pathway directly from the artifacts.
    std::vector<ingest::SensorStream> streams;
    for (const auto& f : c.input_files()) {
        for (auto& s : ingest::parse_wide_csv(f, c.columns, c.rate_hz)) streams.push_back(std::move(s));
    }
    const auto ds = ingest::build_dataset(streams, ingest::infer_label_set(streams), c.windowing());
    const auto fused = ingest::fuse_sides(ds, Limb::Leg);
    const auto x = normalize::transform(model.quantile_map,
                                        features::extract_matrix(fused.windows, c.rate_hz));
    std::size_t correct = 0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto vote = boost::soft_vote(model.balanced.predict_proba(x.row(r)),
                                           model.regularized.predict_proba(x.row(r)));
        const auto& row = rows[r + 1];
        double sum = 0.0;
        for (std::size_t k = 0; k < vote.probabilities.size(); ++k) {
            const double p = *csv::parse_double(row[7 + k]);
            CHECK(p == vote.probabilities[k]);
            sum += p;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        correct += row[5] == row[6];
    }
    CHECK(correct == x.rows());

    c.model = dir.path / "absent.json";
    CHECK_THROWS_AS(run_predict(c, log), ConfigError);
    auto bad = model.to_json();
    bad["schema_version"] = 2;
    CHECK_THROWS_AS(LimbModel::from_json(bad), DataError);
}

TEST_CASE("evaluate writes one report per limb") {
    TempDir dir("evaluate");
    auto c = small_config(dir.path);
    c.synth.subjects = 5;
    c.synth.seconds_per_class = 10;
    std::ostringstream log;
    run_synth(c, log);
    c.inputs = {c.output_dir};
    c.output_dir = dir.path / "eval";
    run_evaluate(c, log);
    for (const char* limb : {"arm", "leg"}) {
        const auto report = nlohmann::json::parse(slurp(c.output_dir / ("report_" + std::string(limb) + ".json")));
        CHECK(report["schema_version"] == 1);
        CHECK(report["limb"] == limb);
        CHECK(report["folds"].size() == 5);
        CHECK(fs::exists(c.output_dir / ("confusion_" + std::string(limb) + ".csv")));
        CHECK(fs::exists(c.output_dir / ("fscore_box_" + std::string(limb) + ".csv")));
    }
}
