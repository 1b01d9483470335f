#include "exrec/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include "exrec/csv.hpp"

namespace exrec::ingest {

std::vector<PositionColumns> ColumnMap::default_positions() {
    return {
        {Limb::Arm, Side::Right, "right_arm_acc_x", "right_arm_acc_y", "right_arm_acc_z"},
        {Limb::Arm, Side::Left, "left_arm_acc_x", "left_arm_acc_y", "left_arm_acc_z"},
        {Limb::Leg, Side::Right, "right_leg_acc_x", "right_leg_acc_y", "right_leg_acc_z"},
        {Limb::Leg, Side::Left, "left_leg_acc_x", "left_leg_acc_y", "left_leg_acc_z"},
    };
}

namespace {

std::size_t require_column(const std::vector<std::string>& header, const std::string& name,
                           const std::string& source) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw DataError(source + ": schema error, missing column \"" + name + "\"");
    }
    return static_cast<std::size_t>(it - header.begin());
}

double numeric_cell(const std::vector<std::string>& row, std::size_t col, const std::string& source,
                    std::size_t line, const std::string& column_name) {
    const std::string& cell = row[col];
    if (cell.find_first_not_of(" \t") == std::string::npos) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    auto value = csv::parse_double(cell);
    if (!value) {
        throw DataError(source + ":" + std::to_string(line) + ": cannot parse \"" + cell +
                        "\" in column \"" + column_name + "\"");
    }
    return *value;
}

}  // namespace

std::vector<SensorStream> parse_wide_csv(std::istream& in, const ColumnMap& map, double rate_hz,
                                         const std::string& source) {
    if (!(rate_hz > 0.0)) throw ConfigError("sampling rate must be positive");
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        header = csv::split_line(line);
        break;
    }
    if (header.empty()) throw DataError(source + ": missing header row");

    const std::size_t subject_col = require_column(header, map.subject, source);
    std::optional<std::size_t> label_col;
    if (!map.label_optional || std::find(header.begin(), header.end(), map.label) != header.end()) {
        label_col = require_column(header, map.label, source);
    }
    std::optional<std::size_t> time_col;
    if (!map.time.empty()) time_col = require_column(header, map.time, source);
    struct AxisCols {
        std::size_t x, y, z;
    };
    std::vector<AxisCols> axis_cols;
    for (const auto& pos : map.positions) {
        axis_cols.push_back({require_column(header, pos.x, source),
                             require_column(header, pos.y, source),
                             require_column(header, pos.z, source)});
    }

    std::vector<std::string> subject_order;
    std::map<std::string, std::vector<SensorStream>> by_subject;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r" || line.front() == '#') continue;
        auto row = csv::split_line(line);
        if (row.size() != header.size()) {
            throw DataError(source + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, found " +
                            std::to_string(row.size()));
        }
        const std::string& subject = row[subject_col];
        auto [it, inserted] = by_subject.try_emplace(subject);
        if (inserted) {
            subject_order.push_back(subject);
            for (const auto& pos : map.positions) {
                it->second.push_back(SensorStream{subject, pos.limb, pos.side, {}, {}});
            }
        }
        auto& streams = it->second;
        std::string label = label_col ? row[*label_col] : std::string();
        if (label.empty()) label = std::string(kNullLabel);
        const double t =
            time_col ? numeric_cell(row, *time_col, source, line_no, map.time)
                     : static_cast<double>(streams.front().samples.size()) / rate_hz;
        for (std::size_t p = 0; p < map.positions.size(); ++p) {
            const auto& pos = map.positions[p];
            TriaxialSample s;
            s.t = t;
            s.ax = numeric_cell(row, axis_cols[p].x, source, line_no, pos.x);
            s.ay = numeric_cell(row, axis_cols[p].y, source, line_no, pos.y);
            s.az = numeric_cell(row, axis_cols[p].z, source, line_no, pos.z);
            streams[p].samples.push_back(s);
            streams[p].labels.push_back(label);
        }
    }

    std::vector<SensorStream> out;
    for (const auto& subject : subject_order) {
        for (auto& s : by_subject[subject]) out.push_back(std::move(s));
    }
    return out;
}

std::vector<SensorStream> parse_wide_csv(const std::filesystem::path& path, const ColumnMap& map,
                                         double rate_hz) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file " + path.string());
    return parse_wide_csv(in, map, rate_hz, path.string());
}

LabelSet infer_label_set(const std::vector<SensorStream>& streams) {
    std::set<std::string> seen;
    for (const auto& s : streams) seen.insert(s.labels.begin(), s.labels.end());
    std::vector<std::string> names{std::string(kNullLabel)};
    for (const auto& name : seen) {
        if (name != kNullLabel) names.push_back(name);
    }
    return LabelSet(std::move(names));
}

std::size_t majority_label(std::span<const std::size_t> sample_labels) {
    if (sample_labels.empty()) throw InvariantError("majority_label on empty window");
    std::map<std::size_t, std::size_t> counts;
    for (auto l : sample_labels) ++counts[l];
    std::size_t best = 0;
    std::size_t best_count = 0;
    bool tie = false;
    for (const auto& [label, count] : counts) {
        if (count > best_count) {
            best = label;
            best_count = count;
            tie = false;
        } else if (count == best_count) {
            tie = true;
        }
    }
    if (tie) return sample_labels[sample_labels.size() / 2];
    return best;
}

std::vector<TriaxialWindow> window_stream(const SensorStream& stream, const LabelSet& labels,
                                          const WindowingConfig& config) {
    if (stream.samples.size() != stream.labels.size()) {
        throw InvariantError("sensor stream has mismatched sample and label counts");
    }
    const std::size_t length = window_length(config.rate_hz, config.window_seconds);
    if (!(config.overlap >= 0.0 && config.overlap < 1.0)) {
        throw ConfigError("overlap fraction must lie in [0, 1)");
    }
    const auto stride = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(length) * (1.0 - config.overlap))));
    const double max_gap = 2.0 / config.rate_hz * (1.0 + 1e-9);

    std::vector<std::size_t> label_idx(stream.labels.size());
    for (std::size_t i = 0; i < stream.labels.size(); ++i) {
        label_idx[i] = labels.index_of(stream.labels[i]);
    }

    auto finite = [](const TriaxialSample& s) {
        return std::isfinite(s.t) && std::isfinite(s.ax) && std::isfinite(s.ay) &&
               std::isfinite(s.az);
    };

    std::vector<TriaxialWindow> out;
    const auto& samples = stream.samples;
    std::size_t i = 0;
    std::size_t window_index = 0;
    while (i < samples.size()) {
        if (!finite(samples[i])) {
            ++i;
            continue;
        }
        std::size_t end = i + 1;
        while (end < samples.size() && finite(samples[end])) {
            const double dt = samples[end].t - samples[end - 1].t;
            if (!(dt > 0.0) || dt > max_gap) break;
            ++end;
        }
        for (std::size_t start = i; start + length <= end; start += stride) {
            TriaxialWindow w;
            w.meta.subject = stream.subject;
            w.meta.limb = stream.limb;
            w.meta.side = stream.side;
            w.meta.provenance = Provenance::Original;
            w.meta.window_index = window_index++;
            w.meta.label = majority_label(
                std::span<const std::size_t>(label_idx.data() + start, length));
            w.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(start),
                             samples.begin() + static_cast<std::ptrdiff_t>(start + length));
            out.push_back(std::move(w));
        }
        i = end;
    }
    return out;
}

WindowedDataset build_dataset(const std::vector<SensorStream>& streams, const LabelSet& labels,
                              const WindowingConfig& config) {
    WindowedDataset ds;
    ds.label_set = labels;
    for (const auto& s : streams) {
        auto windows = window_stream(s, labels, config);
        for (auto& w : windows) ds.windows.push_back(std::move(w));
    }
    return ds;
}

WindowedDataset fuse_sides(const WindowedDataset& dataset, Limb limb) {
    WindowedDataset out;
    out.label_set = dataset.label_set;
    for (const auto& w : dataset.windows) {
        if (w.meta.limb == limb) out.windows.push_back(w);
    }
    std::stable_sort(out.windows.begin(), out.windows.end(),
                     [](const TriaxialWindow& a, const TriaxialWindow& b) {
                         if (a.meta.subject != b.meta.subject) return a.meta.subject < b.meta.subject;
                         if (a.meta.side != b.meta.side) return a.meta.side < b.meta.side;
                         return a.start_time() < b.start_time();
                     });
    return out;
}

void write_windows_csv(const WindowedDataset& dataset, std::ostream& out) {
    out << "# schema_version=" << kSchemaVersion << "\n";
    out << "subject,limb,side,label,provenance,window_index";
    const std::size_t length = dataset.windows.empty() ? 0 : dataset.windows.front().samples.size();
    for (std::size_t i = 0; i < length; ++i) {
        out << ",s" << i << "_x,s" << i << "_y,s" << i << "_z";
    }
    out << "\n";
    for (const auto& w : dataset.windows) {
        out << csv::escape(w.meta.subject) << ',' << to_string(w.meta.limb) << ','
            << to_string(w.meta.side) << ',' << csv::escape(dataset.label_set.name(w.meta.label))
            << ',' << to_string(w.meta.provenance) << ',' << w.meta.window_index;
        for (const auto& s : w.samples) {
            out << ',' << csv::format_double(s.ax) << ',' << csv::format_double(s.ay) << ','
                << csv::format_double(s.az);
        }
        out << "\n";
    }
}

void write_wide_csv(const std::vector<SensorStream>& streams, const ColumnMap& map,
                    std::ostream& out) {
    std::vector<const SensorStream*> by_position;
    for (const auto& pos : map.positions) {
        auto it = std::find_if(streams.begin(), streams.end(), [&](const SensorStream& s) {
            return s.limb == pos.limb && s.side == pos.side;
        });
        if (it == streams.end()) throw InvariantError("write_wide_csv: missing stream for a position");
        by_position.push_back(&*it);
    }
    const std::size_t n = by_position.front()->samples.size();
    for (const auto* s : by_position) {
        if (s->samples.size() != n || s->labels != by_position.front()->labels ||
            s->subject != by_position.front()->subject) {
            throw InvariantError("write_wide_csv: streams differ in subject, length or labels");
        }
    }
    out << "# schema_version=" << kSchemaVersion << "\n";
    out << csv::escape(map.subject);
    if (!map.time.empty()) out << ',' << csv::escape(map.time);
    for (const auto& pos : map.positions) {
        out << ',' << csv::escape(pos.x) << ',' << csv::escape(pos.y) << ',' << csv::escape(pos.z);
    }
    out << ',' << csv::escape(map.label) << "\n";
    const auto& first = *by_position.front();
    const std::string subject = csv::escape(first.subject);
    for (std::size_t i = 0; i < n; ++i) {
        out << subject;
        if (!map.time.empty()) out << ',' << csv::format_double(first.samples[i].t);
        for (const auto* s : by_position) {
            const auto& smp = s->samples[i];
            out << ',' << csv::format_double(smp.ax) << ',' << csv::format_double(smp.ay) << ','
                << csv::format_double(smp.az);
        }
        out << ',' << csv::escape(first.labels[i]) << "\n";
    }
}

}  // namespace exrec::ingest
