#include "exrec/cli.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>

#include "exrec/csv.hpp"
#include "exrec/features.hpp"

namespace exrec::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& text) {
    fs::path p(text);
    return p.is_absolute() || base.empty() ? p : base / p;
}

ingest::ColumnMap columns_from_json(const json& doc) {
    ingest::ColumnMap map;
    for (const auto& [key, value] : doc.items()) {
        if (key == "subject") map.subject = value.get<std::string>();
        else if (key == "label") map.label = value.get<std::string>();
        else if (key == "time") map.time = value.get<std::string>();
        else if (key == "positions") {
            map.positions.clear();
            for (const auto& p : value) {
                ingest::PositionColumns pos;
                pos.limb = parse_limb(p.at("limb").get<std::string>());
                const auto side = p.at("side").get<std::string>();
                if (side == "left") pos.side = Side::Left;
                else if (side == "right") pos.side = Side::Right;
                else throw ConfigError("position side must be 'left' or 'right', got '" + side + "'");
                pos.x = p.at("x").get<std::string>();
                pos.y = p.at("y").get<std::string>();
                pos.z = p.at("z").get<std::string>();
                map.positions.push_back(std::move(pos));
            }
        } else {
            throw ConfigError("unknown columns key '" + key + "'");
        }
    }
    return map;
}

SynthSettings synth_from_json(const json& doc) {
    SynthSettings s;
    for (const auto& [key, value] : doc.items()) {
        if (key == "subjects") s.subjects = value.get<std::size_t>();
        else if (key == "classes") s.classes = value.get<std::size_t>();
        else if (key == "seconds_per_class") s.seconds_per_class = value.get<double>();
        else throw ConfigError("unknown synth key '" + key + "'");
    }
    return s;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw ConfigError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& doc) {
    auto out = open_output(path);
    out << doc.dump(2) << "\n";
    finish(out, path);
}

void prepare_output_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw ConfigError("cannot create output directory " + dir.string());
    }
}

struct LoadedData {
    ingest::WindowedDataset dataset;
    std::size_t files = 0;
};

LoadedData load_data(const RunConfig& config, bool labels_optional = false) {
    auto map = config.columns;
    map.label_optional = labels_optional;
    std::vector<ingest::SensorStream> streams;
    const auto files = config.input_files();
    for (const auto& file : files) {
        for (auto& s : ingest::parse_wide_csv(file, map, config.rate_hz)) streams.push_back(std::move(s));
    }
    LabelSet labels = config.labels.empty() ? ingest::infer_label_set(streams) : LabelSet(config.labels);
    LoadedData out;
    out.dataset = ingest::build_dataset(streams, labels, config.windowing());
    out.files = files.size();
    return out;
}

FeatureMatrix limb_features(const ingest::WindowedDataset& dataset, Limb limb,
                            const augment::Policy& policy, double rate_hz, unsigned threads) {
    const auto fused = ingest::fuse_sides(dataset, limb);
    const auto augmented = augment::augment_dataset(fused, policy);
    return features::extract_matrix(augmented.windows, rate_hz, threads);
}

std::string limb_file(const std::string& stem, Limb limb, const std::string& ext) {
    return stem + "_" + std::string(to_string(limb)) + ext;
}

}  // namespace

std::vector<Limb> parse_limb_selection(const std::string& text) {
    if (text == "both") return {Limb::Arm, Limb::Leg};
    return {parse_limb(text)};
}

RunConfig RunConfig::from_json(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "schema_version") {
                if (value.get<int>() != kSchemaVersion) {
                    throw ConfigError("unsupported config schema_version " + value.dump());
                }
            } else if (key == "inputs") {
                c.inputs.clear();
                if (value.is_string()) c.inputs.push_back(resolve(base_dir, value.get<std::string>()));
                else for (const auto& v : value) c.inputs.push_back(resolve(base_dir, v.get<std::string>()));
            } else if (key == "columns") {
                c.columns = columns_from_json(value);
            } else if (key == "rate_hz") {
                c.rate_hz = value.get<double>();
            } else if (key == "window_seconds") {
                c.window_seconds = value.get<double>();
            } else if (key == "overlap") {
                c.overlap = value.get<double>();
            } else if (key == "limb") {
                c.limbs = parse_limb_selection(value.get<std::string>());
            } else if (key == "augmentation") {
                c.policy.clear();
                for (const auto& v : value) c.policy.push_back(parse_provenance(v.get<std::string>()));
            } else if (key == "labels") {
                c.labels = value.get<std::vector<std::string>>();
            } else if (key == "normalization") {
                for (const auto& [k, v] : value.items()) {
                    if (k == "n_quantiles") c.n_quantiles = v.get<std::size_t>();
                    else throw ConfigError("unknown normalization key '" + k + "'");
                }
            } else if (key == "booster_balanced") {
                c.balanced = boost::TrainConfig::from_json(value, c.balanced);
            } else if (key == "booster_regularized") {
                c.regularized = boost::TrainConfig::from_json(value, c.regularized);
            } else if (key == "folds") {
                c.folds = value.get<std::size_t>();
            } else if (key == "seed") {
                c.seed = value.get<std::uint64_t>();
            } else if (key == "threads") {
                c.threads = value.get<unsigned>();
            } else if (key == "output_dir") {
                c.output_dir = resolve(base_dir, value.get<std::string>());
            } else if (key == "model") {
                c.model = resolve(base_dir, value.get<std::string>());
            } else if (key == "synth") {
                c.synth = synth_from_json(value);
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
}

void RunConfig::validate(Command command) const {
    if (!seed) throw ConfigError("a seed is required: set \"seed\" in the config or pass --seed");
    if (!(rate_hz > 0.0)) throw ConfigError("rate_hz must be positive");
    window_length(rate_hz, window_seconds);
    if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("overlap must lie in [0, 1)");
    if (limbs.empty()) throw ConfigError("no limb selected");
    augment::validate_policy(policy);
    if (n_quantiles < 2) throw ConfigError("n_quantiles must be at least 2");
    balanced.validate();
    regularized.validate();
    if (folds < 2) throw ConfigError("folds must be at least 2");
    if (!labels.empty()) LabelSet check(labels);

    if (command == Command::Synth) {
        if (synth.subjects == 0) throw ConfigError("synth.subjects must be at least 1");
        if (synth.classes < 2) throw ConfigError("synth.classes must be at least 2");
        if (!(synth.seconds_per_class > 0.0)) throw ConfigError("synth.seconds_per_class must be positive");
        return;
    }
    if (inputs.empty()) throw ConfigError("no input files: set \"inputs\" or pass --input");
    for (const auto& p : inputs) {
        if (!fs::exists(p)) throw ConfigError("input path does not exist: " + p.string());
    }
    if (command == Command::Predict) {
        if (model.empty()) throw ConfigError("predict needs a model: set \"model\" or pass --model");
        if (!fs::is_regular_file(model)) throw ConfigError("model file does not exist: " + model.string());
    }
}

eval::PipelineConfig RunConfig::pipeline() const {
    eval::PipelineConfig p;
    p.rate_hz = rate_hz;
    p.policy = policy;
    p.n_quantiles = n_quantiles;
    p.balanced = balanced;
    p.regularized = regularized;
    p.folds = folds;
    p.seed = seed.value_or(0);
    p.threads = threads;
    return p;
}

ingest::WindowingConfig RunConfig::windowing() const {
    return {rate_hz, window_seconds, overlap};
}

std::vector<fs::path> RunConfig::input_files() const {
    std::vector<fs::path> out;
    for (const auto& p : inputs) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(p)) {
                if (entry.is_regular_file() && entry.path().extension() == ".csv") found.push_back(entry.path());
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.push_back(p);
        }
    }
    if (out.empty()) throw ConfigError("no CSV files found in the configured inputs");
    return out;
}

RunConfig load_config(const std::optional<fs::path>& file, const Overrides& o) {
    RunConfig c;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw ConfigError("cannot open config file " + file->string());
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError(file->string() + ": " + e.what());
        }
        c = RunConfig::from_json(doc, file->parent_path());
    }
    if (o.limb) c.limbs = parse_limb_selection(*o.limb);
    if (o.seed) c.seed = o.seed;
    if (o.threads) c.threads = *o.threads;
    if (o.no_augment) c.policy.clear();
    if (o.output_dir) c.output_dir = *o.output_dir;
    if (!o.inputs.empty()) c.inputs = o.inputs;
    if (o.model) c.model = *o.model;
    return c;
}

json LimbModel::to_json() const {
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["kind"] = "limb_model";
    doc["tool_version"] = kToolVersion;
    doc["limb"] = to_string(limb);
    doc["rate_hz"] = rate_hz;
    doc["window_seconds"] = window_seconds;
    doc["quantile_map"] = quantile_map.to_json();
    doc["booster_balanced"] = balanced.to_json();
    doc["booster_regularized"] = regularized.to_json();
    return doc;
}

LimbModel LimbModel::from_json(const json& doc) {
    LimbModel m;
    try {
        if (doc.at("kind").get<std::string>() != "limb_model") throw DataError("file is not a limb model");
        if (doc.at("schema_version").get<int>() != kSchemaVersion) {
            throw DataError("unsupported model schema_version " + doc.at("schema_version").dump() +
                            " (expected " + std::to_string(kSchemaVersion) + ")");
        }
        m.limb = parse_limb(doc.at("limb").get<std::string>());
        m.rate_hz = doc.at("rate_hz").get<double>();
        m.window_seconds = doc.at("window_seconds").get<double>();
        m.quantile_map = normalize::QuantileMap::from_json(doc.at("quantile_map"));
        m.balanced = boost::BoostedEnsemble::from_json(doc.at("booster_balanced"));
        m.regularized = boost::BoostedEnsemble::from_json(doc.at("booster_regularized"));
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
    if (m.balanced.label_set != m.regularized.label_set ||
        m.balanced.feature_names != m.quantile_map.names() ||
        m.regularized.feature_names != m.quantile_map.names()) {
        throw DataError("model components disagree on labels or feature columns");
    }
    return m;
}

void run_synth(const RunConfig& config, std::ostream& log) {
    config.validate(Command::Synth);
    eval::SynthConfig sc;
    sc.subjects = config.synth.subjects;
    sc.classes = config.synth.classes;
    sc.rate_hz = config.rate_hz;
    sc.seconds_per_class = config.synth.seconds_per_class;
    sc.seed = *config.seed;
    const auto streams = eval::synth_generate(sc);
    prepare_output_dir(config.output_dir);

    std::map<std::string, std::vector<ingest::SensorStream>> by_subject;
    std::vector<std::string> order;
    for (const auto& s : streams) {
        if (!by_subject.count(s.subject)) order.push_back(s.subject);
        by_subject[s.subject].push_back(s);
    }
    const auto labels = eval::synth_label_set(sc.classes);
    std::vector<std::size_t> counts(labels.size(), 0);
    for (const auto& subject : order) {
        const auto path = config.output_dir / (subject + ".csv");
        auto out = open_output(path);
        ingest::write_wide_csv(by_subject[subject], config.columns, out);
        finish(out, path);
        for (const auto& l : by_subject[subject].front().labels) ++counts[labels.index_of(l)];
    }
    log << "wrote " << order.size() << " subject files to " << config.output_dir.string() << "\n";
    log << "class,samples\n";
    for (std::size_t c = 0; c < labels.size(); ++c) log << labels.name(c) << ',' << counts[c] << "\n";
}

void run_extract(const RunConfig& config, std::ostream& log) {
    config.validate(Command::Extract);
    const auto data = load_data(config);
    prepare_output_dir(config.output_dir);
    for (auto limb : config.limbs) {
        const auto matrix =
            limb_features(data.dataset, limb, config.policy, config.rate_hz, config.threads);
        const auto path = config.output_dir / limb_file("features", limb, ".csv");
        auto out = open_output(path);
        features::write_matrix_csv(matrix, data.dataset.label_set, out);
        finish(out, path);
        log << to_string(limb) << ": " << matrix.rows() << " rows x " << matrix.cols() << " features -> "
            << path.string() << "\n";
    }
    const auto catalog = config.output_dir / "feature_catalog.json";
    auto out = open_output(catalog);
    out << features::catalog_json() << "\n";
    finish(out, catalog);
}

void run_evaluate(const RunConfig& config, std::ostream& log) {
    config.validate(Command::Evaluate);
    const auto data = load_data(config);
    prepare_output_dir(config.output_dir);
    const auto pipeline = config.pipeline();
    for (auto limb : config.limbs) {
        const auto report = eval::run_cv(data.dataset, limb, pipeline);
        write_json(config.output_dir / limb_file("report", limb, ".json"), report.to_json());
        {
            const auto path = config.output_dir / limb_file("confusion", limb, ".csv");
            auto out = open_output(path);
            report.write_confusion_csv(out);
            finish(out, path);
        }
        {
            const auto path = config.output_dir / limb_file("fscore_box", limb, ".csv");
            auto out = open_output(path);
            report.write_fscore_box_csv(out);
            finish(out, path);
        }
        log << to_string(limb) << ": macro F1 " << report.mean_f1 << " +- " << report.std_f1 << " over "
            << report.folds.size() << " folds (";
        for (std::size_t i = 0; i < report.folds.size(); ++i) {
            log << (i ? ", " : "") << report.folds[i].macro_f1;
        }
        log << ")\n";
    }
}

void run_train(const RunConfig& config, std::ostream& log) {
    config.validate(Command::Train);
    const auto data = load_data(config);
    prepare_output_dir(config.output_dir);
    for (auto limb : config.limbs) {
        const auto raw = limb_features(data.dataset, limb, config.policy, config.rate_hz, config.threads);
        if (raw.rows() == 0) throw DataError("no " + std::string(to_string(limb)) + " windows to train on");
        LimbModel model;
        model.limb = limb;
        model.rate_hz = config.rate_hz;
        model.window_seconds = config.window_seconds;
        model.quantile_map = normalize::fit_quantile(raw, config.n_quantiles, config.threads);
        const auto x = normalize::transform(model.quantile_map, raw);
        const auto y = x.labels();
        auto cfg_b = config.balanced;
        auto cfg_r = config.regularized;
        cfg_b.threads = cfg_r.threads = config.threads;
        model.balanced = boost::train_gbdt(x, y, data.dataset.label_set, cfg_b);
        model.regularized = boost::train_gbdt(x, y, data.dataset.label_set, cfg_r);
        const auto path = config.output_dir / limb_file("model", limb, ".json");
        write_json(path, model.to_json());
        log << to_string(limb) << ": trained on " << x.rows() << " windows -> " << path.string() << "\n";
    }
}

void run_predict(const RunConfig& config, std::ostream& log) {
    config.validate(Command::Predict);
    LimbModel model;
    {
        std::ifstream in(config.model);
        if (!in) throw ConfigError("cannot open model file " + config.model.string());
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw DataError(config.model.string() + ": " + e.what());
        }
        model = LimbModel::from_json(doc);
    }
    if (std::find(config.limbs.begin(), config.limbs.end(), model.limb) == config.limbs.end()) {
        throw ConfigError("model is for the " + std::string(to_string(model.limb)) + " limb" +
                          " but the configured limb selection excludes it");
    }
    if (model.rate_hz != config.rate_hz || model.window_seconds != config.window_seconds) {
        throw ConfigError("model was trained with a different sampling rate or window length");
    }
    RunConfig unlabeled = config;
    unlabeled.labels.clear();
    const auto data = load_data(unlabeled, true);
    prepare_output_dir(config.output_dir);

    const auto fused = ingest::fuse_sides(data.dataset, model.limb);
    const auto raw = features::extract_matrix(fused.windows, config.rate_hz, config.threads);
    const auto x = normalize::transform(model.quantile_map, raw);
    const auto pb = model.balanced.predict_proba(x);
    const auto pr = model.regularized.predict_proba(x);
    const auto& classes = model.balanced.label_set;

    const auto path = config.output_dir / limb_file("predictions", model.limb, ".csv");
    auto out = open_output(path);
    out << "# schema_version=" << kSchemaVersion << "\n";
    out << "subject,limb,side,window_index,start_time,label,predicted";
    for (const auto& name : classes.names()) out << ",p_" << csv::escape(name);
    out << "\n";
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto& w = fused.windows[r];
        const auto vote = boost::soft_vote(pb[r], pr[r]);
        out << csv::escape(w.meta.subject) << ',' << to_string(w.meta.limb) << ',' << to_string(w.meta.side)
            << ',' << w.meta.window_index << ',' << csv::format_double(w.start_time()) << ','
            << csv::escape(data.dataset.label_set.name(w.meta.label)) << ','
            << csv::escape(classes.name(vote.predicted));
        for (double p : vote.probabilities) out << ',' << csv::format_double(p);
        out << "\n";
    }
    finish(out, path);
    log << to_string(model.limb) << ": predicted " << x.rows() << " windows -> " << path.string() << "\n";
}

void run(Command command, const RunConfig& config, std::ostream& log) {
    switch (command) {
        case Command::Synth: return run_synth(config, log);
        case Command::Extract: return run_extract(config, log);
        case Command::Evaluate: return run_evaluate(config, log);
        case Command::Train: return run_train(config, log);
        case Command::Predict: return run_predict(config, log);
    }
}

}  // namespace exrec::cli
