#include "exrec/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

#include "exrec/csv.hpp"
#include "exrec/parallel.hpp"
#include "json.hpp"

namespace exrec::features {

std::string_view to_string(ChannelFamily family) {
    switch (family) {
        case ChannelFamily::Raw: return "raw";
        case ChannelFamily::Smv: return "smv";
        case ChannelFamily::Angle: return "angle";
    }
    return "raw";
}

std::string_view to_string(FeatureGroup group) {
    switch (group) {
        case FeatureGroup::StatisticalTemporal: return "statistical_temporal";
        case FeatureGroup::FractalSpectral: return "fractal_spectral";
        case FeatureGroup::HigherOrderDifferential: return "higher_order_differential";
    }
    return "statistical_temporal";
}

ChannelFamily channel_family(std::size_t channel) {
    if (channel < 3) return ChannelFamily::Raw;
    if (channel < 7) return ChannelFamily::Smv;
    return ChannelFamily::Angle;
}

const std::array<CatalogEntry, kFeaturesPerChannel>& catalog() {
    using G = FeatureGroup;
    static const std::array<CatalogEntry, kFeaturesPerChannel> entries = {{
        {"mean", G::StatisticalTemporal},
        {"median", G::StatisticalTemporal},
        {"mode", G::StatisticalTemporal},
        {"max", G::StatisticalTemporal},
        {"min", G::StatisticalTemporal},
        {"std", G::StatisticalTemporal},
        {"var", G::StatisticalTemporal},
        {"iqr", G::StatisticalTemporal},
        {"rms", G::StatisticalTemporal},
        {"average_power", G::StatisticalTemporal},
        {"abs_energy", G::StatisticalTemporal},
        {"peak_to_peak", G::StatisticalTemporal},
        {"mean_crossing_rate", G::StatisticalTemporal},
        {"auc", G::StatisticalTemporal},
        {"entropy", G::StatisticalTemporal},
        {"autocorr_lag1", G::StatisticalTemporal},
        {"temporal_centroid", G::StatisticalTemporal},
        {"mean_abs_diff", G::StatisticalTemporal},
        {"mean_diff", G::StatisticalTemporal},
        {"median_abs_diff", G::StatisticalTemporal},
        {"median_diff", G::StatisticalTemporal},
        {"sum_abs_diff", G::StatisticalTemporal},
        {"signal_distance", G::StatisticalTemporal},
        {"slope", G::StatisticalTemporal},
        {"zero_crossing_rate", G::StatisticalTemporal},
        {"positive_turning_points", G::StatisticalTemporal},
        {"negative_turning_points", G::StatisticalTemporal},
        {"petrosian_fd", G::FractalSpectral},
        {"katz_fd", G::FractalSpectral},
        {"dominant_freq_1", G::FractalSpectral},
        {"dominant_freq_2", G::FractalSpectral},
        {"d2_mean", G::HigherOrderDifferential},
        {"d2_median", G::HigherOrderDifferential},
        {"d2_std", G::HigherOrderDifferential},
        {"d2_mean_abs", G::HigherOrderDifferential},
        {"d2_median_abs", G::HigherOrderDifferential},
        {"d2_std_abs", G::HigherOrderDifferential},
        {"d2_katz_fd", G::HigherOrderDifferential},
        {"d3_mean", G::HigherOrderDifferential},
        {"d3_median", G::HigherOrderDifferential},
        {"d3_std", G::HigherOrderDifferential},
        {"d3_mean_abs", G::HigherOrderDifferential},
        {"d3_median_abs", G::HigherOrderDifferential},
        {"d3_std_abs", G::HigherOrderDifferential},
        {"d3_katz_fd", G::HigherOrderDifferential},
    }};
    return entries;
}

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        out.reserve(kFeatureCount);
        for (auto channel : kChannelNames) {
            for (const auto& entry : catalog()) {
                out.push_back(std::string(channel) + "__" + std::string(entry.name));
            }
        }
        return out;
    }();
    return names;
}

ColumnInfo column_info(std::size_t column) {
    if (column >= kFeatureCount) throw InvariantError("feature column out of range");
    const std::size_t channel = column / kFeaturesPerChannel;
    const std::size_t idx = column % kFeaturesPerChannel;
    return {channel, idx, channel_family(channel), catalog()[idx].group};
}

double wrapped_angle(double u, double v) {
    const double a = std::atan2(u, v);
    return a <= -std::numbers::pi ? std::numbers::pi : a;
}

std::array<ChannelSeries, kChannelCount> derive_channels(const TriaxialWindow& window) {
    std::array<ChannelSeries, kChannelCount> channels;
    const std::size_t n = window.samples.size();
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        channels[c].name = kChannelNames[c];
        channels[c].values.resize(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = window.samples[i];
        const double x2 = s.ax * s.ax;
        const double y2 = s.ay * s.ay;
        const double z2 = s.az * s.az;
        channels[0].values[i] = s.ax;
        channels[1].values[i] = s.ay;
        channels[2].values[i] = s.az;
        channels[3].values[i] = x2 + y2 + z2;
        channels[4].values[i] = x2 + y2;
        channels[5].values[i] = x2 + z2;
        channels[6].values[i] = y2 + z2;
        channels[7].values[i] = wrapped_angle(s.ax, s.ay);
        channels[8].values[i] = wrapped_angle(s.ax, s.az);
        channels[9].values[i] = wrapped_angle(s.ay, s.az);
    }
    return channels;
}

namespace {

double mean_of(std::span<const double> s) {
    if (s.empty()) return 0.0;
    return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

double population_variance(std::span<const double> s, double mean) {
    if (s.empty()) return 0.0;
    double acc = 0.0;
    for (double v : s) acc += (v - mean) * (v - mean);
    return acc / static_cast<double>(s.size());
}

// Linear interpolation between order statistics of an already sorted range.
double sorted_quantile(std::span<const double> sorted, double p) {
    if (sorted.empty()) return 0.0;
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return sorted_quantile(values, 0.5);
}

// Sign changes of (s - center); a zero keeps the previous nonzero sign.
std::size_t sign_changes(std::span<const double> s, double center) {
    int prev = 0;
    std::size_t changes = 0;
    for (double v : s) {
        const double d = v - center;
        int sign = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
        if (sign == 0) continue;
        if (prev != 0 && sign != prev) ++changes;
        prev = sign;
    }
    return changes;
}

// 10 equal-width bins over [min, max]; a constant range puts everything in bin 0.
std::array<std::size_t, 10> histogram10(std::span<const double> s, double lo, double hi) {
    std::array<std::size_t, 10> counts{};
    const double width = (hi - lo) / 10.0;
    for (double v : s) {
        std::size_t bin = 0;
        if (width > 0.0) {
            const double pos = (v - lo) / width;
            bin = pos >= 9.0 ? 9 : static_cast<std::size_t>(std::max(0.0, pos));
        }
        ++counts[bin];
    }
    return counts;
}

struct AbsStats {
    double mean, median, std, mean_abs, median_abs, std_abs;
};

AbsStats location_stats(std::span<const double> s) {
    AbsStats st{};
    st.mean = mean_of(s);
    st.median = median_of({s.begin(), s.end()});
    st.std = std::sqrt(population_variance(s, st.mean));
    std::vector<double> abs_values(s.size());
    std::transform(s.begin(), s.end(), abs_values.begin(), [](double v) { return std::abs(v); });
    st.mean_abs = mean_of(abs_values);
    st.std_abs = std::sqrt(population_variance(abs_values, st.mean_abs));
    st.median_abs = median_of(std::move(abs_values));
    return st;
}

}  // namespace

std::array<double, kStatisticalCount> extract_statistical(std::span<const double> s,
                                                          double rate_hz) {
    if (s.size() < 4) throw DataError("statistical features need at least 4 samples");
    const std::size_t n = s.size();
    const double nd = static_cast<double>(n);
    const double dt = 1.0 / rate_hz;

    std::vector<double> sorted(s.begin(), s.end());
    std::sort(sorted.begin(), sorted.end());
    const double mean = mean_of(s);
    const double median = sorted_quantile(sorted, 0.5);
    const double lo = sorted.front();
    const double hi = sorted.back();
    const double var = population_variance(s, mean);
    const double stddev = std::sqrt(var);
    const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);

    const auto counts = histogram10(s, lo, hi);
    const std::size_t mode_bin = static_cast<std::size_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin());
    const double width = (hi - lo) / 10.0;
    const double mode = width > 0.0 ? lo + (static_cast<double>(mode_bin) + 0.5) * width : lo;

    double entropy = 0.0;
    if (width > 0.0) {
        for (auto c : counts) {
            if (c == 0) continue;
            const double p = static_cast<double>(c) / nd;
            entropy -= p * std::log2(p);
        }
    }

    double energy = 0.0;
    double weighted_time = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = s[i] * s[i];
        energy += e;
        weighted_time += static_cast<double>(i) * dt * e;
    }
    const double avg_power = energy / nd;
    const double rms = std::sqrt(avg_power);
    const double centroid = (energy == 0.0 || weighted_time == 0.0) ? 0.0 : weighted_time / energy;

    double auc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) auc += 0.5 * (s[i] + s[i + 1]) * dt;

    double autocorr = 0.0;
    if (var > 0.0) {
        double num = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) num += (s[i] - mean) * (s[i + 1] - mean);
        autocorr = num / (var * nd);
    }

    std::vector<double> diffs(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) diffs[i] = s[i + 1] - s[i];
    std::vector<double> abs_diffs(diffs.size());
    std::transform(diffs.begin(), diffs.end(), abs_diffs.begin(),
                   [](double v) { return std::abs(v); });
    const double sum_abs_diff = std::accumulate(abs_diffs.begin(), abs_diffs.end(), 0.0);
    const double mean_abs_diff = sum_abs_diff / static_cast<double>(diffs.size());
    const double mean_diff = mean_of(diffs);
    double distance = 0.0;
    for (double d : diffs) distance += std::sqrt(1.0 + d * d);

    const double index_mean = (nd - 1.0) / 2.0;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double di = static_cast<double>(i) - index_mean;
        sxy += di * (s[i] - mean);
        sxx += di * di;
    }
    const double slope = sxy / sxx;

    std::size_t peaks = 0;
    std::size_t troughs = 0;
    for (std::size_t i = 0; i + 1 < diffs.size(); ++i) {
        if (diffs[i] > 0.0 && diffs[i + 1] < 0.0) ++peaks;
        if (diffs[i] < 0.0 && diffs[i + 1] > 0.0) ++troughs;
    }

    const double crossings_denominator = nd - 1.0;
    return {
        mean,
        median,
        mode,
        hi,
        lo,
        stddev,
        var,
        iqr,
        rms,
        avg_power,
        energy,
        hi - lo,
        static_cast<double>(sign_changes(s, mean)) / crossings_denominator,
        auc,
        entropy,
        autocorr,
        centroid,
        mean_abs_diff,
        mean_diff,
        median_of(abs_diffs),
        median_of(diffs),
        sum_abs_diff,
        distance,
        slope,
        static_cast<double>(sign_changes(s, 0.0)) / crossings_denominator,
        static_cast<double>(peaks),
        static_cast<double>(troughs),
    };
}

double petrosian_fd(std::span<const double> s) {
    if (s.size() < 3) throw DataError("Petrosian fractal dimension needs at least 3 samples");
    std::vector<double> diffs(s.size() - 1);
    for (std::size_t i = 0; i + 1 < s.size(); ++i) diffs[i] = s[i + 1] - s[i];
    const double n = static_cast<double>(s.size());
    const double n_delta = static_cast<double>(sign_changes(diffs, 0.0));
    const double log_n = std::log10(n);
    return log_n / (log_n + std::log10(n / (n + 0.4 * n_delta)));
}

double katz_fd(std::span<const double> s) {
    if (s.size() < 2) throw DataError("Katz fractal dimension needs at least 2 samples");
    double length = 0.0;
    double extent = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        length += std::abs(s[i] - s[i - 1]);
        extent = std::max(extent, std::abs(s[i] - s[0]));
    }
    constexpr double kCap = 10.0;
    if (length == 0.0 || extent == 0.0) return 1.0;
    const double log_n = std::log10(static_cast<double>(s.size() - 1));
    const double denominator = log_n + std::log10(extent / length);
    if (denominator <= 1e-12) return kCap;
    return std::min(kCap, log_n / denominator);
}

namespace {

// cos/sin tables for an n-point DFT, indexed by (k * t) mod n.
struct Twiddles {
    std::size_t n = 0;
    std::vector<double> cos_table;
    std::vector<double> sin_table;
};

const Twiddles& twiddles_for(std::size_t n) {
    thread_local Twiddles cache;
    if (cache.n != n) {
        cache.n = n;
        cache.cos_table.resize(n);
        cache.sin_table.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) /
                                 static_cast<double>(n);
            cache.cos_table[i] = std::cos(angle);
            cache.sin_table[i] = std::sin(angle);
        }
    }
    return cache;
}

}  // namespace

DominantFrequencies dominant_frequencies(std::span<const double> s, double rate_hz) {
    if (s.size() < 4) throw DataError("dominant frequency needs at least 4 samples");
    const std::size_t n = s.size();
    const double mean = mean_of(s);
    double scale = 0.0;
    std::vector<double> centered(n);
    for (std::size_t i = 0; i < n; ++i) {
        centered[i] = s[i] - mean;
        scale = std::max(scale, std::abs(s[i]));
    }
    // Magnitudes at rounding-noise level count as zero.
    const double floor = 1e-12 * static_cast<double>(n) * scale;

    const auto& tw = twiddles_for(n);
    std::vector<double> magnitude(n / 2 + 1, 0.0);
    for (std::size_t k = 1; k <= n / 2; ++k) {
        double re = 0.0;
        double im = 0.0;
        std::size_t idx = 0;
        for (std::size_t t = 0; t < n; ++t) {
            re += centered[t] * tw.cos_table[idx];
            im -= centered[t] * tw.sin_table[idx];
            idx += k;
            if (idx >= n) idx -= n;
        }
        const double m = std::hypot(re, im);
        magnitude[k] = m > floor ? m : 0.0;
    }

    std::size_t best = 0;
    std::size_t second = 0;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        if (magnitude[k] == 0.0) continue;
        if (best == 0 || magnitude[k] > magnitude[best]) {
            second = best;
            best = k;
        } else if (second == 0 || magnitude[k] > magnitude[second]) {
            second = k;
        }
    }
    const double resolution = rate_hz / static_cast<double>(n);
    return {static_cast<double>(best) * resolution, static_cast<double>(second) * resolution};
}

std::vector<double> diff_n(std::span<const double> s, std::size_t n) {
    if (n == 0) throw DataError("differential rank must be positive");
    if (s.size() <= n) throw DataError("insufficient samples for differential of rank " +
                                       std::to_string(n));
    std::vector<double> out(s.begin(), s.end());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i] = out[i + 1] - out[i];
        out.pop_back();
    }
    return out;
}

std::array<double, kDifferentialCount> extract_differential(std::span<const double> s) {
    if (s.size() < 5) throw DataError("differential features need at least 5 samples");
    std::array<double, kDifferentialCount> out{};
    std::size_t k = 0;
    for (std::size_t rank : {2u, 3u}) {
        const auto d = diff_n(s, rank);
        const auto st = location_stats(d);
        out[k++] = st.mean;
        out[k++] = st.median;
        out[k++] = st.std;
        out[k++] = st.mean_abs;
        out[k++] = st.median_abs;
        out[k++] = st.std_abs;
        out[k++] = katz_fd(d);
    }
    return out;
}

FeatureVector extract_window(const TriaxialWindow& window, double rate_hz) {
    if (auto v = validate_window(window, window.samples.size()); !v || window.samples.size() < 5) {
        throw DataError("invalid window for subject " + window.meta.subject + ": " +
                        (v ? std::string("fewer than 5 samples") : v.message));
    }
    FeatureVector fv;
    fv.values.reserve(kFeatureCount);
    const auto channels = derive_channels(window);
    for (const auto& ch : channels) {
        const auto stats = extract_statistical(ch.values, rate_hz);
        fv.values.insert(fv.values.end(), stats.begin(), stats.end());
        fv.values.push_back(petrosian_fd(ch.values));
        fv.values.push_back(katz_fd(ch.values));
        const auto freqs = dominant_frequencies(ch.values, rate_hz);
        fv.values.push_back(freqs.first);
        fv.values.push_back(freqs.second);
        const auto diffs = extract_differential(ch.values);
        fv.values.insert(fv.values.end(), diffs.begin(), diffs.end());
    }
    for (auto& v : fv.values) {
        if (!std::isfinite(v)) {
            v = 0.0;
            ++fv.replaced_nonfinite;
        }
    }
    return fv;
}

FeatureMatrix extract_matrix(std::span<const TriaxialWindow> windows, double rate_hz,
                             unsigned threads, ExtractionTally* tally) {
    FeatureMatrix matrix(feature_names(), windows.size());
    std::vector<std::size_t> replaced(windows.size(), 0);
    parallel_for(windows.size(), threads, [&](std::size_t i) {
        auto fv = extract_window(windows[i], rate_hz);
        std::copy(fv.values.begin(), fv.values.end(), matrix.row(i).begin());
        matrix.meta(i) = windows[i].meta;
        replaced[i] = fv.replaced_nonfinite;
    });
    if (tally) {
        tally->windows += windows.size();
        tally->replaced_nonfinite += std::accumulate(replaced.begin(), replaced.end(), std::size_t{0});
    }
    return matrix;
}

std::vector<double> anova_f_scores(const FeatureMatrix& matrix,
                                   std::span<const std::size_t> labels) {
    if (labels.size() != matrix.rows()) {
        throw DataError("ANOVA: label count does not match matrix rows");
    }
    std::vector<std::size_t> classes(labels.begin(), labels.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    const std::size_t k = classes.size();
    const std::size_t n = matrix.rows();
    if (k < 2) throw DataError("ANOVA needs at least 2 classes");
    if (n <= k) throw DataError("ANOVA needs more rows than classes");

    std::vector<std::size_t> group(n);
    std::vector<double> group_count(k, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        group[r] = static_cast<std::size_t>(
            std::lower_bound(classes.begin(), classes.end(), labels[r]) - classes.begin());
        group_count[group[r]] += 1.0;
    }

    std::vector<double> scores(matrix.cols(), 0.0);
    std::vector<double> group_sum(k);
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
        std::fill(group_sum.begin(), group_sum.end(), 0.0);
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            group_sum[group[r]] += matrix.at(r, c);
            total += matrix.at(r, c);
        }
        const double grand_mean = total / static_cast<double>(n);
        double between = 0.0;
        for (std::size_t g = 0; g < k; ++g) {
            const double gm = group_sum[g] / group_count[g];
            between += group_count[g] * (gm - grand_mean) * (gm - grand_mean);
        }
        double within = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double gm = group_sum[group[r]] / group_count[group[r]];
            within += (matrix.at(r, c) - gm) * (matrix.at(r, c) - gm);
        }
        if (within == 0.0) {
            scores[c] = between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        } else {
            scores[c] = (between / static_cast<double>(k - 1)) /
                        (within / static_cast<double>(n - k));
        }
    }
    return scores;
}

void write_matrix_csv(const FeatureMatrix& matrix, const LabelSet& labels, std::ostream& out) {
    out << "# schema_version=" << kSchemaVersion << "\n";
    out << "subject,limb,side,label,provenance";
    for (const auto& name : matrix.names()) out << ',' << name;
    out << "\n";
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        const auto& m = matrix.meta(r);
        out << csv::escape(m.subject) << ',' << exrec::to_string(m.limb) << ','
            << exrec::to_string(m.side) << ',' << csv::escape(labels.name(m.label)) << ','
            << exrec::to_string(m.provenance);
        for (double v : matrix.row(r)) out << ',' << csv::format_double(v);
        out << "\n";
    }
}

std::string catalog_json() {
    nlohmann::ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["feature_count"] = kFeatureCount;
    auto& channels = doc["channels"] = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        channels.push_back({{"name", kChannelNames[c]}, {"family", to_string(channel_family(c))}});
    }
    auto& groups = doc["catalog"] = nlohmann::ordered_json::array();
    for (const auto& entry : catalog()) {
        groups.push_back({{"name", entry.name}, {"group", to_string(entry.group)}});
    }
    doc["columns"] = feature_names();
    return doc.dump(2);
}

}  // namespace exrec::features
