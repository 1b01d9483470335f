#include "exrec/normalize.hpp"

#include <algorithm>
#include <cmath>

#include "exrec/parallel.hpp"

namespace exrec::normalize {

QuantileMap::QuantileMap(std::vector<std::string> names,
                         std::vector<std::vector<double>> references)
    : names_(std::move(names)), references_(std::move(references)) {
    if (names_.size() != references_.size()) {
        throw DataError("quantile map: name and reference counts differ");
    }
    for (const auto& ref : references_) {
        if (ref.size() < 2 || ref.size() != references_.front().size()) {
            throw DataError("quantile map: every column needs the same number (>= 2) of levels");
        }
        if (!std::is_sorted(ref.begin(), ref.end())) {
            throw DataError("quantile map: reference values must be non-decreasing");
        }
    }
}

double QuantileMap::transform_value(std::size_t col, double value) const {
    const auto& ref = references_[col];
    const std::size_t n = ref.size();
    if (ref.front() == ref.back()) return 0.5;
    if (value < ref.front()) return 0.0;
    if (value > ref.back()) return 1.0;
    const double step = 1.0 / static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::lower_bound(ref.begin(), ref.end(), value) - ref.begin());
    const auto hi = static_cast<std::size_t>(std::upper_bound(ref.begin(), ref.end(), value) - ref.begin());
    if (lo != hi) {
        // Repeated reference values: midpoint of the tied level range.
        return 0.5 * (static_cast<double>(lo) + static_cast<double>(hi - 1)) * step;
    }
    const double frac = (value - ref[lo - 1]) / (ref[lo] - ref[lo - 1]);
    return std::clamp((static_cast<double>(lo - 1) + frac) * step, 0.0, 1.0);
}

nlohmann::json QuantileMap::to_json() const {
    nlohmann::json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["kind"] = "quantile_map";
    doc["output_distribution"] = "uniform";
    doc["names"] = names_;
    doc["references"] = references_;
    return doc;
}

QuantileMap QuantileMap::from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("schema_version").get<int>() != kSchemaVersion) {
            throw DataError("quantile map: unsupported schema_version " +
                            doc.at("schema_version").dump());
        }
        return QuantileMap(doc.at("names").get<std::vector<std::string>>(),
                           doc.at("references").get<std::vector<std::vector<double>>>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("quantile map: malformed JSON: ") + e.what());
    }
}

QuantileMap fit_quantile(const FeatureMatrix& matrix, std::size_t n_quantiles, unsigned threads) {
    if (matrix.rows() < 2) throw DataError("quantile fit needs at least 2 rows");
    if (n_quantiles < 2) throw ConfigError("n_quantiles must be at least 2");
    const std::size_t levels = std::min(n_quantiles, matrix.rows());
    std::vector<std::vector<double>> references(matrix.cols());
    parallel_for(matrix.cols(), threads, [&](std::size_t c) {
        auto column = matrix.column(c);
        std::sort(column.begin(), column.end());
        auto& ref = references[c];
        ref.resize(levels);
        const double last = static_cast<double>(column.size() - 1);
        for (std::size_t i = 0; i < levels; ++i) {
            const double pos = static_cast<double>(i) * last / static_cast<double>(levels - 1);
            const auto idx = std::min(static_cast<std::size_t>(std::floor(pos)), column.size() - 1);
            const std::size_t next = std::min(idx + 1, column.size() - 1);
            const double frac = pos - static_cast<double>(idx);
            ref[i] = frac == 0.0 ? column[idx] : column[idx] + (column[next] - column[idx]) * frac;
        }
        // Interpolation rounding must not break monotonicity.
        for (std::size_t i = 1; i < levels; ++i) ref[i] = std::max(ref[i], ref[i - 1]);
    });
    return QuantileMap(matrix.names(), std::move(references));
}

FeatureMatrix transform(const QuantileMap& map, const FeatureMatrix& matrix) {
    if (map.names() != matrix.names()) {
        throw DataError("quantile transform: feature columns do not match the fitted map");
    }
    FeatureMatrix out = matrix;
    // Column by column keeps each reference array hot in cache.
    for (std::size_t c = 0; c < out.cols(); ++c) {
        for (std::size_t r = 0; r < out.rows(); ++r) out.at(r, c) = map.transform_value(c, out.at(r, c));
    }
    return out;
}

}  // namespace exrec::normalize
