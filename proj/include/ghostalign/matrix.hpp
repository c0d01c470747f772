// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ghostalign {

/// Dense row-major matrix of doubles. Rows are tokens, columns are channels
/// whenever the matrix holds activations.
class Matrix {
public:
    Matrix() = default;

    /// Zero-filled rows x cols.
    Matrix(std::size_t rows, std::size_t cols);

    /// Takes ownership of `values`; throws ShapeError on a length mismatch and
    /// NumericalError if any entry is NaN or infinite.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> d);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {values_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    Matrix transposed() const;

    /// Rows [first, first + count) as a new matrix.
    Matrix row_block(std::size_t first, std::size_t count) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

/// a * b.
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// out += aᵀ * b, folding rows of a and b in order. Splitting the rows over
/// several calls gives the same bits as one call on the stacked rows.
void matmul_tn_accumulate(Matrix& out, const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
/// ‖a − b‖_F / ‖b‖_F; returns ‖a‖_F when b is zero.
double relative_frobenius_error(const Matrix& a, const Matrix& b);

/// Stacks matrices with equal column counts vertically.
Matrix vstack(std::span<const Matrix> parts);

/// Worker threads used by the dense kernels. Results are bit-identical for
/// every thread count: work is split by output rows and each entry is
/// accumulated in a fixed order.
void set_num_threads(unsigned n);
unsigned num_threads() noexcept;

}  // namespace ghostalign
