#pragma once

// Wide sensor CSV parsing, windowing and per-limb side fusion.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "exrec/core.hpp"

namespace exrec::ingest {

struct PositionColumns {
    Limb limb = Limb::Arm;
    Side side = Side::Left;
    std::string x, y, z;
};

// Maps the CSV header onto subject/label/axis columns. An empty `time`
// column means sample times are derived as row_index / rate per subject.
struct ColumnMap {
    std::string subject = "sbj_id";
    std::string label = "label";
    std::string time;
    // When set, a missing label column reads every sample as Null.
    bool label_optional = false;
    std::vector<PositionColumns> positions = default_positions();

    static std::vector<PositionColumns> default_positions();
};

struct SensorStream {
    std::string subject;
    Limb limb = Limb::Arm;
    Side side = Side::Left;
    std::vector<TriaxialSample> samples;
    std::vector<std::string> labels;
};

struct WindowedDataset {
    std::vector<TriaxialWindow> windows;
    LabelSet label_set;
};

// Streams come back ordered by first appearance of the subject, then by the
// position order of the column map. Empty numeric cells read as NaN; any
// other unparseable cell is a DataError carrying the line number.
std::vector<SensorStream> parse_wide_csv(const std::filesystem::path& path, const ColumnMap& map,
                                         double rate_hz);
std::vector<SensorStream> parse_wide_csv(std::istream& in, const ColumnMap& map, double rate_hz,
                                         const std::string& source_name = "<stream>");

// Null first, then the remaining labels in lexicographic order.
LabelSet infer_label_set(const std::vector<SensorStream>& streams);

struct WindowingConfig {
    double rate_hz = 50.0;
    double window_seconds = 1.0;
    double overlap = 0.0;
};

// Segments a stream into fixed-length windows. Windows never cross a time gap
// larger than two sample periods, a non-increasing timestamp, or a non-finite
// sample; each such break starts a new segment. Trailing remainders shorter
// than a window are dropped.
std::vector<TriaxialWindow> window_stream(const SensorStream& stream, const LabelSet& labels,
                                          const WindowingConfig& config);

// Majority label of a window's samples; ties resolve to the center sample.
std::size_t majority_label(std::span<const std::size_t> sample_labels);

WindowedDataset build_dataset(const std::vector<SensorStream>& streams, const LabelSet& labels,
                              const WindowingConfig& config);

// All windows of one limb, both sides, sorted by (subject, side, start time).
WindowedDataset fuse_sides(const WindowedDataset& dataset, Limb limb);

void write_windows_csv(const WindowedDataset& dataset, std::ostream& out);

// Writes streams of one subject back into the wide layout; streams must
// share length and labels and cover every position of the column map.
void write_wide_csv(const std::vector<SensorStream>& streams, const ColumnMap& map,
                    std::ostream& out);

}  // namespace exrec::ingest
