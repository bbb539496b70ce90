#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace pclv {

/// Dense row-major feature matrix. Plain storage, no math; the learners keep
/// their own column-ordered views where they need them.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    void append_row(std::span<const double> values) {
        data.insert(data.end(), values.begin(), values.end());
        ++rows;
    }

    /// New matrix holding the given rows, in the given order.
    Matrix select_rows(const std::vector<std::size_t>& indices) const {
        Matrix out(indices.size(), cols);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const auto src = row(indices[i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        return out;
    }

    bool operator==(const Matrix& other) const = default;
};

}  // namespace pclv
