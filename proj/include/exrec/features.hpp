#pragma once

// Channel derivation and the 45-feature-per-channel catalog.
//
// Every window yields ten channels: the three raw axes, four squared signal
// magnitude series (xyz, xy, xz, yz) and three pairwise axis angles
// atan2(u, v). Each channel contributes 27 statistical/temporal features,
// 4 fractal/spectral features and 14 higher-order differential features,
// giving 135 + 180 + 135 = 450 values per window.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "exrec/core.hpp"
#include "exrec/matrix.hpp"

namespace exrec::features {

inline constexpr std::size_t kChannelCount = 10;
inline constexpr std::size_t kStatisticalCount = 27;
inline constexpr std::size_t kFractalSpectralCount = 4;
inline constexpr std::size_t kDifferentialCount = 14;
inline constexpr std::size_t kFeaturesPerChannel =
    kStatisticalCount + kFractalSpectralCount + kDifferentialCount;
inline constexpr std::size_t kFeatureCount = kChannelCount * kFeaturesPerChannel;

enum class ChannelFamily { Raw, Smv, Angle };
enum class FeatureGroup { StatisticalTemporal, FractalSpectral, HigherOrderDifferential };

std::string_view to_string(ChannelFamily family);
std::string_view to_string(FeatureGroup group);

inline constexpr std::array<std::string_view, kChannelCount> kChannelNames = {
    "acc_x",   "acc_y",   "acc_z",    "smv2_xyz", "smv2_xy",
    "smv2_xz", "smv2_yz", "angle_xy", "angle_xz", "angle_yz",
};

ChannelFamily channel_family(std::size_t channel);

struct CatalogEntry {
    std::string_view name;
    FeatureGroup group;
};

// The per-channel catalog in extraction order.
const std::array<CatalogEntry, kFeaturesPerChannel>& catalog();

// "<channel>__<feature>" for all 450 columns, channel-major.
const std::vector<std::string>& feature_names();

struct ColumnInfo {
    std::size_t channel;
    std::size_t catalog_index;
    ChannelFamily family;
    FeatureGroup group;
};
ColumnInfo column_info(std::size_t column);

struct ChannelSeries {
    std::string_view name;
    std::vector<double> values;
};

std::array<ChannelSeries, kChannelCount> derive_channels(const TriaxialWindow& window);

// atan2(u, v) folded into (-pi, pi].
double wrapped_angle(double u, double v);

std::array<double, kStatisticalCount> extract_statistical(std::span<const double> s,
                                                          double rate_hz);

double petrosian_fd(std::span<const double> s);
double katz_fd(std::span<const double> s);

struct DominantFrequencies {
    double first = 0.0;
    double second = 0.0;
};
DominantFrequencies dominant_frequencies(std::span<const double> s, double rate_hz);

std::vector<double> diff_n(std::span<const double> s, std::size_t n);

std::array<double, kDifferentialCount> extract_differential(std::span<const double> s);

struct FeatureVector {
    std::vector<double> values;
    std::size_t replaced_nonfinite = 0;

    const std::vector<std::string>& names() const { return feature_names(); }
};

// Throws DataError if the window fails validation.
FeatureVector extract_window(const TriaxialWindow& window, double rate_hz);

struct ExtractionTally {
    std::size_t windows = 0;
    std::size_t replaced_nonfinite = 0;
};

// Rows follow window order; the result is identical for any thread count.
FeatureMatrix extract_matrix(std::span<const TriaxialWindow> windows, double rate_hz,
                             unsigned threads = 1, ExtractionTally* tally = nullptr);

// One-way ANOVA F statistic per column. Zero within-class scatter with a
// nonzero between-class scatter yields +infinity.
std::vector<double> anova_f_scores(const FeatureMatrix& matrix,
                                   std::span<const std::size_t> labels);

void write_matrix_csv(const FeatureMatrix& matrix, const LabelSet& labels, std::ostream& out);

// Sidecar describing catalog names, groups and channel families.
std::string catalog_json();

}  // namespace exrec::features
