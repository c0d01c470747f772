// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ghostalign/simulator.hpp"

namespace ghostalign::pruning {

enum class Criterion { streamline_cosine, block_influence, removal_loss };

/// How boundary similarity is averaged.
enum class CosineMode {
    per_token,  // mean over tokens of cos(x_t, y_t)
    flattened,  // cos(vec(X), vec(Y))
};

enum class RemovalMetric {
    mse,       // final hidden state mean-squared error
    log_loss,  // mean KL(dense ‖ pruned) of the toy output head
};

std::string to_string(Criterion c);
Criterion parse_criterion(const std::string& s);
std::string to_string(CosineMode m);
CosineMode parse_cosine_mode(const std::string& s);
std::string to_string(RemovalMetric m);
RemovalMetric parse_removal_metric(const std::string& s);

struct LayerScores {
    Criterion criterion = Criterion::streamline_cosine;
    /// Indexed by block start (L - n + 1 entries) for streamline_cosine and by
    /// layer (L entries) otherwise.
    std::vector<double> scores;
    /// Set for streamline_cosine.
    std::optional<sim::BoundarySpec> chosen_block;
    /// Layers to prune, ascending. Always filled.
    std::vector<std::size_t> chosen_layers;
    CosineMode cosine = CosineMode::per_token;
    RemovalMetric metric = RemovalMetric::mse;
};

/// {criterion, scores, chosen, metadata}. `chosen` is {start, count} for
/// contiguous selection and a layer list otherwise.
nlohmann::json to_json(const LayerScores& s);

/// Mean token cosine between matching rows; 1 when both rows are zero and 0
/// when exactly one is.
double mean_token_cosine(const Matrix& a, const Matrix& b);
double flattened_cosine(const Matrix& a, const Matrix& b);

/// Streamline scoring on precomputed hidden states (L + 1 of them, as from
/// sim::capture_all_states).
LayerScores contiguous_block_scores(std::span<const Matrix> states, std::size_t n,
                                    CosineMode mode = CosineMode::per_token);

/// Highest boundary cosine over all contiguous n-layer blocks; ties go to the
/// lowest start. Throws DomainError unless 1 <= n <= L - 1.
LayerScores select_contiguous_block(const sim::ToyModel& model, const Matrix& calib, std::size_t n,
                                    CosineMode mode = CosineMode::per_token);

/// BI(ℓ) = 1 - mean token cosine between the input and output of layer ℓ;
/// the n lowest-BI layers are chosen.
LayerScores block_influence_scores(const sim::ToyModel& model, const Matrix& calib, std::size_t n = 1);

/// Scores each layer by the final-output error of skipping it alone and
/// chooses the n cheapest, removed jointly.
LayerScores select_by_removal_loss(const sim::ToyModel& model, const Matrix& eval_inputs, std::size_t n,
                                   RemovalMetric metric = RemovalMetric::mse);

}  // namespace ghostalign::pruning
