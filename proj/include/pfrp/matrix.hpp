#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pfrp {

// Dense row-major matrix of doubles. Throughout the library rows are samples
// and columns are features/time steps.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
};

// c = a * b^T with a: n x p, b: m x p. Both operands are scanned along
// contiguous rows, which is the layout used for weight matrices.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix from_row(const std::vector<double>& v);

}  // namespace pfrp
