#pragma once

// Rank-based quantile normalization to a uniform [0, 1] output.

#include <cstddef>
#include <string>
#include <vector>

#include "exrec/matrix.hpp"
#include "json.hpp"

namespace exrec::normalize {

inline constexpr std::size_t kDefaultQuantiles = 1000;

class QuantileMap {
public:
    QuantileMap() = default;
    QuantileMap(std::vector<std::string> names, std::vector<std::vector<double>> references);

    std::size_t cols() const { return names_.size(); }
    std::size_t levels() const { return references_.empty() ? 0 : references_.front().size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<double>& references(std::size_t col) const { return references_.at(col); }

    // Cumulative probability of `value` against column `col`'s references.
    double transform_value(std::size_t col, double value) const;

    nlohmann::json to_json() const;
    static QuantileMap from_json(const nlohmann::json& doc);

    bool operator==(const QuantileMap&) const = default;

private:
    std::vector<std::string> names_;
    std::vector<std::vector<double>> references_;
};

// Stores, per column, the empirical quantiles at min(n_quantiles, rows)
// equally spaced probability levels spanning [0, 1].
QuantileMap fit_quantile(const FeatureMatrix& matrix, std::size_t n_quantiles = kDefaultQuantiles,
                         unsigned threads = 1);

// Throws DataError when column names differ from the map.
FeatureMatrix transform(const QuantileMap& map, const FeatureMatrix& matrix);

}  // namespace exrec::normalize
