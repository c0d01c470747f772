// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ghostalign/matrix.hpp"

namespace ghostalign::linalg {

/// Thin SVD a = u · diag(sigma) · vt with r = min(rows, cols).
///
/// sigma is non-increasing and non-negative. Columns of u and rows of vt are
/// orthonormal even when a is rank deficient: directions belonging to zero
/// singular values are completed to an orthonormal set.
struct SvdFactors {
    Matrix u;                   // rows x r
    std::vector<double> sigma;  // r
    Matrix vt;                  // r x cols

    std::size_t rank(double rel_tol) const noexcept;
};

struct JacobiOptions {
    int max_sweeps = 64;
    /// A column pair counts as orthogonal once |<a_i, a_j>| <= tol · ‖a_i‖‖a_j‖.
    double tolerance = 1e-12;
};

/// One-sided (Hestenes) Jacobi SVD. Throws ConvergenceError if some pair is
/// still being rotated after `max_sweeps` sweeps.
SvdFactors thin_svd(const Matrix& a, const JacobiOptions& options = {});

/// V · Σ† · Uᵀ · b, where singular values σᵢ <= eps · σ₁ are dropped.
Matrix pinv_apply(const SvdFactors& f, const Matrix& b, double eps);

/// Smallest ridge actually used by ridge_solve.
inline constexpr double kRidgeFloor = 1e-12;

/// Solves (gram + eps·I) · M = cross for M by Cholesky, with an LDLᵀ fallback.
/// `eps` below kRidgeFloor is raised to the floor.
Matrix ridge_solve(const Matrix& gram, const Matrix& cross, double eps);

/// Running XᵀX and XᵀY over calibration batches. Rows are folded one token at
/// a time in arrival order, so any split of the same rows into batches yields
/// bit-identical sums.
class GramAccumulator {
public:
    GramAccumulator() = default;
    /// x_dim columns for X, y_dim columns for Y.
    GramAccumulator(std::size_t x_dim, std::size_t y_dim);

    const Matrix& gram() const noexcept { return gram_; }
    const Matrix& cross() const noexcept { return cross_; }
    std::uint64_t token_count() const noexcept { return token_count_; }
    std::size_t x_dim() const noexcept { return gram_.rows(); }
    std::size_t y_dim() const noexcept { return cross_.cols(); }

    void add(const Matrix& x_batch, const Matrix& y_batch);

private:
    Matrix gram_;
    Matrix cross_;
    std::uint64_t token_count_ = 0;
};

GramAccumulator gram_accumulate(GramAccumulator acc, const Matrix& x_batch, const Matrix& y_batch);

constexpr bool is_power_of_two(std::size_t c) noexcept { return c != 0 && (c & (c - 1)) == 0; }

/// Normalized Sylvester–Walsh–Hadamard matrix, entries ±1/√c, H·Hᵀ = I.
/// Throws UnsupportedDimensionError unless c is a power of two.
Matrix hadamard_matrix(std::size_t c);

}  // namespace ghostalign::linalg
