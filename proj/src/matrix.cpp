// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ghostalign/matrix.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>
#include <thread>

#include "ghostalign/error.hpp"

namespace ghostalign {

namespace {

std::atomic<unsigned> g_threads{1};

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// Runs fn(begin, end) over [0, n) split into contiguous chunks.
template <typename Fn>
void parallel_rows(std::size_t n, std::size_t work_per_row, Fn&& fn) {
    const unsigned threads = g_threads.load(std::memory_order_relaxed);
    constexpr std::size_t kMinWork = 1 << 16;
    if (threads <= 1 || n < 2 || n * work_per_row < kMinWork) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t chunks = std::min<std::size_t>(threads, n);
    const std::size_t step = (n + chunks - 1) / chunks;
    std::vector<std::jthread> pool;
    pool.reserve(chunks);
    for (std::size_t begin = 0; begin < n; begin += step) {
        const std::size_t end = std::min(n, begin + step);
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw ShapeError("expected " + std::to_string(rows_ * cols_) + " values for a " + std::to_string(rows_) +
                         "x" + std::to_string(cols_) + " matrix, got " + std::to_string(values_.size()));
    }
    if (!all_finite()) throw NumericalError("matrix contains NaN or infinite entries");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

Matrix Matrix::row_block(std::size_t first, std::size_t count) const {
    if (first + count > rows_) {
        throw ShapeError("row block [" + std::to_string(first) + ", " + std::to_string(first + count) +
                         ") exceeds " + std::to_string(rows_) + " rows");
    }
    Matrix out(count, cols_);
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(first * cols_), count * cols_, out.values_.begin());
    return out;
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("cannot add " + shape_str(a) + " and " + shape_str(b));
    Matrix out = a;
    auto ov = out.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("cannot subtract " + shape_str(b) + " from " + shape_str(a));
    Matrix out = a;
    auto ov = out.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] -= bv[i];
    return out;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix out = a;
    for (double& v : out.values()) v *= s;
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ShapeError("cannot multiply " + shape_str(a) + " by " + shape_str(b));
    Matrix out(a.rows(), b.cols());
    const std::size_t inner = a.cols();
    const std::size_t n = b.cols();
    parallel_rows(a.rows(), inner * n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double* orow = out.row(i).data();
            const double* arow = a.row(i).data();
            for (std::size_t k = 0; k < inner; ++k) {
                const double aik = arow[k];
                const double* brow = b.row(k).data();
                for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
            }
        }
    });
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    Matrix out(a.cols(), b.cols());
    matmul_tn_accumulate(out, a, b);
    return out;
}

void matmul_tn_accumulate(Matrix& out, const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ShapeError("cannot multiply transpose of " + shape_str(a) + " by " + shape_str(b));
    if (out.rows() != a.cols() || out.cols() != b.cols())
        throw ShapeError("accumulator " + shape_str(out) + " does not match " + std::to_string(a.cols()) + "x" +
                         std::to_string(b.cols()));
    const std::size_t n = b.cols();
    // Output row i accumulates over tokens in order, independent of the split.
    parallel_rows(a.cols(), a.rows() * n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = 0; t < a.rows(); ++t) {
            const double* arow = a.row(t).data();
            const double* brow = b.row(t).data();
            for (std::size_t i = begin; i < end; ++i) {
                const double ati = arow[i];
                double* orow = out.row(i).data();
                for (std::size_t j = 0; j < n; ++j) orow[j] += ati * brow[j];
            }
        }
    });
}

double frobenius_norm(const Matrix& a) {
    double sum = 0.0;
    for (double v : a.values()) sum += v * v;
    return std::sqrt(sum);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("cannot compare " + shape_str(a) + " with " + shape_str(b));
    double worst = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) worst = std::max(worst, std::abs(av[i] - bv[i]));
    return worst;
}

double relative_frobenius_error(const Matrix& a, const Matrix& b) {
    const double denom = frobenius_norm(b);
    const double num = frobenius_norm(a - b);
    return denom > 0.0 ? num / denom : num;
}

Matrix vstack(std::span<const Matrix> parts) {
    if (parts.empty()) return {};
    std::size_t rows = 0;
    const std::size_t cols = parts.front().cols();
    for (const Matrix& p : parts) {
        if (p.cols() != cols) throw ShapeError("vstack column mismatch: " + shape_str(parts.front()) + " vs " + shape_str(p));
        rows += p.rows();
    }
    Matrix out(rows, cols);
    auto dst = out.values().begin();
    for (const Matrix& p : parts) dst = std::copy(p.values().begin(), p.values().end(), dst);
    return out;
}

void set_num_threads(unsigned n) { g_threads.store(std::max(1u, n), std::memory_order_relaxed); }

unsigned num_threads() noexcept { return g_threads.load(std::memory_order_relaxed); }

}  // namespace ghostalign
