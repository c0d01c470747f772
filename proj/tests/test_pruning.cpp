// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ghostalign/error.hpp"
#include "ghostalign/pruning.hpp"

using namespace ghostalign;
using namespace ghostalign::pruning;
using ghostalign::sim::BoundarySpec;

namespace {

double naive_token_cosine(const Matrix& a, const Matrix& b) {
    double total = 0.0;
    for (std::size_t t = 0; t < a.rows(); ++t) {
        double ab = 0.0, aa = 0.0, bb = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            ab += a(t, j) * b(t, j);
            aa += a(t, j) * a(t, j);
            bb += b(t, j) * b(t, j);
        }
        total += ab / std::sqrt(aa * bb);
    }
    return total / static_cast<double>(a.rows());
}

double naive_mse(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        const double d = a.values()[i] - b.values()[i];
        s += d * d;
    }
    return s / static_cast<double>(a.values().size());
}

double naive_kl(const Matrix& zp, const Matrix& zq) {
    double total = 0.0;
    for (std::size_t t = 0; t < zp.rows(); ++t) {
        double sp = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < zp.cols(); ++i) {
            sp += std::exp(zp(t, i));
            sq += std::exp(zq(t, i));
        }
        for (std::size_t i = 0; i < zp.cols(); ++i) {
            const double p = std::exp(zp(t, i)) / sp;
            const double q = std::exp(zq(t, i)) / sq;
            total += p * std::log(p / q);
        }
    }
    return total / static_cast<double>(zp.rows());
}

}  // namespace

TEST(Cosine, EdgeCases) {
    const Matrix zero(2, 3);
    EXPECT_EQ(mean_token_cosine(zero, zero), 1.0);
    const Matrix one(2, 3, {1, 0, 0, 0, 1, 0});
    EXPECT_EQ(mean_token_cosine(zero, one), 0.0);
    EXPECT_EQ(mean_token_cosine(one, one), 1.0);
    EXPECT_EQ(mean_token_cosine(one, -1.0 * one), -1.0);
    EXPECT_THROW(mean_token_cosine(one, Matrix(3, 2)), ShapeError);
}

TEST(Cosine, PerTokenDiffersFromFlattened) {
    const Matrix a(2, 2, {1, 0, 10, 0});
    const Matrix b(2, 2, {0, 1, 10, 0});
    EXPECT_DOUBLE_EQ(mean_token_cosine(a, b), 0.5);
    EXPECT_NEAR(flattened_cosine(a, b), 100.0 / 101.0, 1e-15);
}

TEST(StreamlineCosine, FindsZeroedBlock) {
    const auto model = sim::with_zeroed_layers(sim::build_toy_model(12, 32, 7), 4, 3);
    const Matrix calib = sim::sample_inputs(model, 256, 1);
    const auto s = select_contiguous_block(model, calib, 3);
    ASSERT_TRUE(s.chosen_block.has_value());
    EXPECT_EQ(*s.chosen_block, BoundarySpec(4, 3));
    EXPECT_EQ(s.scores[4], 1.0);
    EXPECT_EQ(s.chosen_layers, (std::vector<std::size_t>{4, 5, 6}));
}

TEST(StreamlineCosine, BruteForceOracle) {
    const auto model = sim::build_toy_model(12, 32, 3);
    const Matrix calib = sim::sample_inputs(model, 128, 2);
    const auto s = select_contiguous_block(model, calib, 3);
    ASSERT_EQ(s.scores.size(), 10u);

    std::size_t best = 0;
    double best_score = -2.0;
    for (std::size_t start = 0; start + 3 <= 12; ++start) {
        const Matrix pre = sim::run_layers(model, calib, 0, start);
        const Matrix post = sim::run_layers(model, pre, start, start + 3);
        const double c = naive_token_cosine(pre, post);
        EXPECT_NEAR(s.scores[start], c, 1e-12) << start;
        if (c > best_score) {
            best_score = c;
            best = start;
        }
    }
    EXPECT_EQ(s.chosen_block->start(), best);
}

TEST(StreamlineCosine, LargestBlockHasTwoCandidates) {
    const auto model = sim::build_toy_model(12, 16, 1);
    const auto s = select_contiguous_block(model, sim::sample_inputs(model, 32, 1), 11);
    EXPECT_EQ(s.scores.size(), 2u);
}

TEST(StreamlineCosine, TiesGoToLowestStart) {
    // Identical states everywhere make every block score 1.
    const std::vector<Matrix> states(6, Matrix(4, 3, std::vector<double>(12, 1.0)));
    const auto s = contiguous_block_scores(states, 2);
    EXPECT_EQ(s.chosen_block->start(), 0u);
}

TEST(StreamlineCosine, ScaleInvariant) {
    const auto model = sim::build_toy_model(8, 16, 2);
    auto states = sim::capture_all_states(model, sim::sample_inputs(model, 64, 1));
    const auto base = contiguous_block_scores(states, 2);
    for (std::size_t i = 0; i < states.size(); ++i) states[i] = (0.5 + static_cast<double>(i)) * states[i];
    const auto scaled = contiguous_block_scores(states, 2);
    for (std::size_t i = 0; i < base.scores.size(); ++i) EXPECT_NEAR(base.scores[i], scaled.scores[i], 1e-14);
    EXPECT_EQ(base.chosen_block, scaled.chosen_block);
}

TEST(StreamlineCosine, DomainOfN) {
    const auto model = sim::build_toy_model(6, 8, 1);
    const Matrix calib = sim::sample_inputs(model, 8, 1);
    EXPECT_THROW(select_contiguous_block(model, calib, 0), DomainError);
    EXPECT_THROW(select_contiguous_block(model, calib, 6), DomainError);
    EXPECT_NO_THROW(select_contiguous_block(model, calib, 5));
}

TEST(BlockInfluence, ZeroLayerScoresZero) {
    const auto model = sim::with_zeroed_layers(sim::build_toy_model(6, 16, 4), 2, 1);
    const auto s = block_influence_scores(model, sim::sample_inputs(model, 64, 1), 1);
    EXPECT_EQ(s.scores[2], 0.0);
    EXPECT_EQ(s.chosen_layers, (std::vector<std::size_t>{2}));
    for (double v : s.scores) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 2.0);
    }
}

TEST(BlockInfluence, RecomputationOracle) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto model = sim::build_toy_model(6, 16, seed);
        const Matrix calib = sim::sample_inputs(model, 64, 5);
        const auto s = block_influence_scores(model, calib, 2);
        std::vector<double> oracle;
        for (std::size_t l = 0; l < 6; ++l) {
            const Matrix in = sim::run_layers(model, calib, 0, l);
            oracle.push_back(1.0 - naive_token_cosine(in, sim::run_layers(model, in, l, l + 1)));
            EXPECT_NEAR(s.scores[l], oracle.back(), 1e-12);
        }
        std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5};
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return oracle[a] < oracle[b]; });
        std::vector<std::size_t> expected{idx[0], idx[1]};
        std::sort(expected.begin(), expected.end());
        EXPECT_EQ(s.chosen_layers, expected);
    }
}

TEST(RemovalLoss, ZeroLayerHasNoLoss) {
    const auto model = sim::with_zeroed_layers(sim::build_toy_model(6, 16, 4), 3, 1);
    const Matrix x = sim::sample_inputs(model, 32, 1);
    for (auto metric : {RemovalMetric::mse, RemovalMetric::log_loss}) {
        const auto s = select_by_removal_loss(model, x, 1, metric);
        EXPECT_EQ(s.scores[3], 0.0);
        EXPECT_EQ(s.chosen_layers, (std::vector<std::size_t>{3}));
        for (double v : s.scores) EXPECT_GE(v, 0.0);
    }
}

TEST(RemovalLoss, ExhaustiveOracle) {
    const auto model = sim::build_toy_model(3, 8, 9);
    const Matrix x = sim::sample_inputs(model, 40, 2);
    const Matrix dense = sim::dense_forward(model, x);
    const auto mse = select_by_removal_loss(model, x, 1, RemovalMetric::mse);
    const auto kl = select_by_removal_loss(model, x, 2, RemovalMetric::log_loss);
    std::size_t best = 0;
    for (std::size_t l = 0; l < 3; ++l) {
        const Matrix skipped = sim::run_layers(model, sim::run_layers(model, x, 0, l), l + 1, 3);
        const double e = naive_mse(skipped, dense);
        EXPECT_NEAR(mse.scores[l], e, 1e-12 * (1.0 + e));
        const double k = naive_kl(sim::logits(model, dense), sim::logits(model, skipped));
        EXPECT_NEAR(kl.scores[l], k, 1e-10 * (1.0 + k));
        if (e < mse.scores[best]) best = l;
    }
    EXPECT_EQ(mse.chosen_layers, (std::vector<std::size_t>{best}));
    EXPECT_EQ(kl.chosen_layers.size(), 2u);
}

TEST(Scores, Json) {
    const auto model = sim::build_toy_model(6, 8, 1);
    const Matrix x = sim::sample_inputs(model, 16, 1);
    const auto block = to_json(select_contiguous_block(model, x, 2));
    EXPECT_EQ(block["criterion"], "streamline_cosine");
    EXPECT_EQ(block["scores"].size(), 5u);
    EXPECT_EQ(block["chosen"]["count"], 2);
    EXPECT_EQ(block["metadata"]["cosine"], "per_token");
    const auto removal = to_json(select_by_removal_loss(model, x, 2));
    EXPECT_TRUE(removal["chosen"].is_array());
    EXPECT_EQ(removal["metadata"]["removal_metric"], "mse");
}

TEST(Scores, ParseNames) {
    EXPECT_EQ(parse_criterion("block_influence"), Criterion::block_influence);
    EXPECT_EQ(parse_cosine_mode("flattened"), CosineMode::flattened);
    EXPECT_EQ(parse_removal_metric("log_loss"), RemovalMetric::log_loss);
    EXPECT_THROW(parse_criterion("random"), ConfigError);
}
