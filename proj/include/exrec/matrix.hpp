#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "exrec/core.hpp"

namespace exrec {

// Dense row-major feature table with per-row window metadata.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::vector<std::string> names, std::size_t rows)
        : names_(std::move(names)), rows_(rows), data_(rows * names_.size(), 0.0), meta_(rows) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

    WindowMeta& meta(std::size_t r) { return meta_[r]; }
    const WindowMeta& meta(std::size_t r) const { return meta_[r]; }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, c);
        return out;
    }

    // Copies the given rows, in order, into a new matrix.
    FeatureMatrix select(std::span<const std::size_t> row_indices) const {
        FeatureMatrix out(names_, row_indices.size());
        for (std::size_t i = 0; i < row_indices.size(); ++i) {
            auto src = row(row_indices[i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
            out.meta_[i] = meta_[row_indices[i]];
        }
        return out;
    }

    std::vector<std::size_t> labels() const {
        std::vector<std::size_t> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = meta_[r].label;
        return out;
    }

    bool operator==(const FeatureMatrix&) const = default;

private:
    std::vector<std::string> names_;
    std::size_t rows_ = 0;
    std::vector<double> data_;
    std::vector<WindowMeta> meta_;
};

}  // namespace exrec
