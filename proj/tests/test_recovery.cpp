// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "ghostalign/error.hpp"
#include "ghostalign/recovery.hpp"

using namespace ghostalign;
using namespace ghostalign::recovery;
using ghostalign::sim::ActivationPair;

namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
    return e;
}

Matrix from_eigen(const Eigen::MatrixXd& e) {
    Matrix m(e.rows(), e.cols());
    for (Eigen::Index r = 0; r < e.rows(); ++r)
        for (Eigen::Index c = 0; c < e.cols(); ++c) m(r, c) = e(r, c);
    return m;
}

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    return sim::gaussian_matrix(rows, cols, seed);
}

ActivationPair toy_pair(std::uint64_t seed, std::size_t tokens, std::size_t start, std::size_t n) {
    const auto model = sim::build_toy_model(12, 64, seed);
    return sim::forward_capture(model, sim::sample_inputs(model, tokens, 1), sim::BoundarySpec(start, n));
}

}  // namespace

TEST(Ghost, ZeroGapGivesZeroOperator) {
    const Matrix x = gaussian(100, 8, 1);
    for (Solver solver : {Solver::svd_pinv, Solver::ridge_normal}) {
        const auto op = fit_ghost({x, x}, 1e-6, solver);
        EXPECT_EQ(frobenius_norm(op.m_star), 0.0);
        EXPECT_EQ(op.fit_residual, 0.0);
        EXPECT_EQ(op.token_count, 100u);
    }
}

TEST(Ghost, RecoversKnownLinearGap) {
    const Matrix x = gaussian(512, 16, 2);
    const Matrix a = 0.3 * gaussian(16, 16, 3);
    const ActivationPair pair{x, x + matmul(x, a)};
    for (Solver solver : {Solver::svd_pinv, Solver::ridge_normal}) {
        const auto op = fit_ghost(pair, 1e-6, solver);
        EXPECT_LE(relative_frobenius_error(op.m_star, a), 1e-8) << to_string(solver);
        EXPECT_LE(op.fit_residual, 1e-8 * frobenius_norm(pair.post));
    }
}

TEST(Ghost, RankDeficientMatchesMinimumNormOracle) {
    const Matrix x = matmul(gaussian(200, 10, 4), gaussian(10, 16, 5));
    const Matrix y = gaussian(200, 16, 6);
    const ActivationPair pair{x, y};
    const auto op = fit_ghost(pair, 1e-6, Solver::svd_pinv);

    // Oracle: minimum-norm least squares via Eigen's SVD, column by column.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(x), Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-6);
    const Eigen::MatrixXd delta = to_eigen(pair.gap());
    Eigen::MatrixXd expected(16, 16);
    for (Eigen::Index j = 0; j < 16; ++j) expected.col(j) = svd.solve(delta.col(j));
    EXPECT_LE(relative_frobenius_error(op.m_star, from_eigen(expected)), 1e-8);

    // Nothing outside the row space of X.
    const Eigen::MatrixXd v = svd.matrixV().leftCols(10);
    const Eigen::MatrixXd m = to_eigen(op.m_star);
    EXPECT_LE((m - v * (v.transpose() * m)).norm(), 1e-8 * m.norm());
}

TEST(Ghost, RidgeSatisfiesNormalEquations) {
    const auto pair = toy_pair(3, 2048, 4, 3);
    const double eps = 1e-6;
    const auto op = fit_ghost(pair, eps, Solver::ridge_normal);
    const Eigen::MatrixXd x = to_eigen(pair.pre);
    const Eigen::MatrixXd d = to_eigen(pair.gap());
    const Eigen::MatrixXd m = to_eigen(op.m_star);
    const Eigen::MatrixXd grad = x.transpose() * (x * m - d) + eps * m;
    EXPECT_LE(grad.norm(), 1e-8 * (x.transpose() * d).norm());
}

TEST(Ghost, SolversAgreeOnWellConditionedData) {
    const auto pair = toy_pair(5, 1024, 2, 2);
    const auto a = fit_ghost(pair, 1e-6, Solver::svd_pinv);
    const auto b = fit_ghost(pair, 1e-6, Solver::ridge_normal);
    EXPECT_LE(relative_frobenius_error(a.m_star, b.m_star), 1e-6);
}

TEST(Ghost, StreamingMatchesSingleBatchRidge) {
    const auto pair = toy_pair(1, 512, 3, 3);
    linalg::GramAccumulator acc(64, 64);
    acc.add(pair.pre, pair.gap());
    const auto streamed = fit_ghost_streaming(acc, 1e-6);
    EXPECT_EQ(streamed.m_star, fit_ghost(pair, 1e-6, Solver::ridge_normal).m_star);
    EXPECT_EQ(streamed.token_count, 512u);
    EXPECT_THROW(fit_ghost_streaming(linalg::GramAccumulator(4, 4)), DegenerateInputError);
}

TEST(Ghost, DegenerateAndInvalidInput) {
    EXPECT_THROW(fit_ghost({Matrix(10, 4), gaussian(10, 4, 1)}), DegenerateInputError);
    EXPECT_THROW(fit_ghost({gaussian(10, 4, 1), gaussian(10, 3, 2)}), ShapeError);
    EXPECT_THROW(fit_ghost({gaussian(10, 4, 1), gaussian(10, 4, 2)}, 0.0), NumericalError);
}

TEST(ChannelScaleFit, ExactScales) {
    const Matrix x = gaussian(50, 6, 7);
    auto op = fit_channel_scale({x, 2.0 * x});
    for (double s : op.s) EXPECT_NEAR(s, 2.0, 1e-14);
    op = fit_channel_scale({x, x});
    for (double s : op.s) EXPECT_NEAR(s, 1.0, 1e-14);
    EXPECT_TRUE(op.degenerate_channels.empty());
}

TEST(ChannelScaleFit, ScalarLeastSquaresOracle) {
    const auto pair = toy_pair(2, 256, 5, 3);
    const auto op = fit_channel_scale(pair);
    for (std::size_t j = 0; j < 64; ++j) {
        double xy = 0.0, xx = 0.0;
        for (std::size_t t = 0; t < 256; ++t) {
            xy += pair.pre(t, j) * pair.post(t, j);
            xx += pair.pre(t, j) * pair.pre(t, j);
        }
        EXPECT_NEAR(op.s[j], xy / xx, 1e-12 * std::abs(xy / xx));
    }
}

TEST(ChannelScaleFit, ZeroChannelIsDegenerate) {
    Matrix x = gaussian(20, 3, 8);
    for (std::size_t t = 0; t < 20; ++t) x(t, 1) = 0.0;
    const auto op = fit_channel_scale({x, x});
    EXPECT_EQ(op.degenerate_channels, (std::vector<std::size_t>{1}));
    EXPECT_EQ(op.s[1], 1.0);
}

TEST(HadamardFit, IdentityPairGivesIdentity) {
    const Matrix x = gaussian(64, 8, 9);
    const auto op = fit_hadamard_patch({x, x});
    for (double d : op.d) EXPECT_NEAR(d, 1.0, 1e-12);
    EXPECT_LE(max_abs_diff(op.fused, Matrix::identity(8)), 1e-12);
}

TEST(HadamardFit, RotatedDiagonalOracle) {
    const std::size_t c = 8;
    const Matrix h = linalg::hadamard_matrix(c);
    const std::vector<double> d{0.5, 1.0, 1.5, 2.0, -1.0, 0.25, 3.0, 1.25};
    const Matrix x = gaussian(128, c, 10);
    const Matrix target = matmul(matmul(h, Matrix::diagonal(d)), h.transposed());
    const auto op = fit_hadamard_patch({x, matmul(x, target)});
    for (std::size_t k = 0; k < c; ++k) EXPECT_NEAR(op.d[k], d[k], 1e-12);
    EXPECT_LE(max_abs_diff(op.fused, target), 1e-12);
    EXPECT_EQ(op.fused, op.fused.transposed());
    EXPECT_LE(op.fit_residual, 1e-10);
}

TEST(HadamardFit, NonPowerOfTwoRejected) {
    const Matrix x = gaussian(16, 6, 1);
    EXPECT_THROW(fit_hadamard_patch({x, x}), UnsupportedDimensionError);
}

TEST(Dominance, GhostBeatsRestrictedFamilies) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto pair = toy_pair(seed, 1024, 4, 3);
        const double ghost = alignment_residual(pair, fit_ghost(pair, 1e-6, Solver::svd_pinv));
        const double slack = 1e-9 * frobenius_norm(pair.post);
        EXPECT_LE(ghost, alignment_residual(pair, IdentityOperator{}) + slack);
        EXPECT_LE(ghost, alignment_residual(pair, fit_channel_scale(pair)) + slack);
        EXPECT_LE(ghost, alignment_residual(pair, fit_hadamard_patch(pair)) + slack);
    }
}

TEST(ApplyOperator, Cases) {
    const Matrix x(2, 2, {1, 2, 3, 4});
    EXPECT_EQ(apply_operator(x, IdentityOperator{}), x);
    ChannelScale s;
    s.s = {2.0, -1.0};
    EXPECT_EQ(apply_operator(x, s), Matrix(2, 2, {2, -2, 6, -4}));
    GhostOperator g;
    g.m_star = Matrix(2, 2, {0, 1, 0, 0});
    EXPECT_EQ(apply_operator(x, g), Matrix(2, 2, {1, 3, 3, 7}));
    EXPECT_EQ(dense_matrix(g, 2), Matrix(2, 2, {1, 1, 0, 1}));
    EXPECT_EQ(additive_part(s, 2), Matrix(2, 2, {1, 0, 0, -2}));
    EXPECT_THROW(apply_operator(Matrix(2, 3), g), ShapeError);
    EXPECT_FALSE(static_cast<bool>(as_boundary_map(IdentityOperator{})));
    EXPECT_EQ(as_boundary_map(g)(x), apply_operator(x, g));
}

TEST(FitOperator, Dispatch) {
    const Matrix x = gaussian(32, 8, 11);
    const ActivationPair pair{x, 1.5 * x};
    EXPECT_TRUE(std::holds_alternative<IdentityOperator>(fit_operator(pair, Method::identity)));
    EXPECT_TRUE(std::holds_alternative<ChannelScale>(fit_operator(pair, Method::diag)));
    EXPECT_TRUE(std::holds_alternative<HadamardPatch>(fit_operator(pair, Method::rotate)));
    EXPECT_TRUE(std::holds_alternative<GhostOperator>(fit_operator(pair, Method::ghost)));
    EXPECT_EQ(parse_method("ghost"), Method::ghost);
    EXPECT_EQ(parse_solver("svd"), Solver::svd_pinv);
    EXPECT_THROW(parse_method("lora"), ConfigError);
}

TEST(Symmetry, WorkedExample) {
    const auto s = decompose_symmetry(Matrix(2, 2, {1, 2, 0, 1}));
    EXPECT_EQ(s.m_sym, Matrix(2, 2, {1, 1, 1, 1}));
    EXPECT_EQ(s.m_asym, Matrix(2, 2, {0, 1, -1, 0}));
    EXPECT_DOUBLE_EQ(s.norm_total * s.norm_total, 6.0);
    EXPECT_DOUBLE_EQ(s.norm_sym * s.norm_sym, 4.0);
    EXPECT_DOUBLE_EQ(s.norm_asym * s.norm_asym, 2.0);
}

TEST(Symmetry, SymmetricAndSkewInputs) {
    const Matrix a = gaussian(5, 5, 12);
    const Matrix sym = a + a.transposed();
    const Matrix skew = a - a.transposed();
    EXPECT_EQ(decompose_symmetry(sym).norm_asym, 0.0);
    EXPECT_EQ(decompose_symmetry(skew).norm_sym, 0.0);
    EXPECT_EQ(decompose_symmetry(Matrix(3, 3)).sym_ratio(), 0.0);
    EXPECT_THROW(decompose_symmetry(Matrix(2, 3)), ShapeError);
}

TEST(Symmetry, PythagoreanOnFittedOperators) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto op = fit_ghost(toy_pair(seed, 512, 4, 3));
        const auto s = decompose_symmetry(op.m_star);
        const double total2 = s.norm_total * s.norm_total;
        EXPECT_LE(std::abs(total2 - s.norm_sym * s.norm_sym - s.norm_asym * s.norm_asym), 1e-10 * total2);
        EXPECT_GT(s.norm_asym, 1e-6 * s.norm_total);
        EXPECT_LE(max_abs_diff(s.m_sym + s.m_asym, op.m_star), 1e-15 * s.norm_total);
    }
}
