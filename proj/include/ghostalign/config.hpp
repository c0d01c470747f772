// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ghostalign/pruning.hpp"
#include "ghostalign/recovery.hpp"
#include "ghostalign/simulator.hpp"

namespace ghostalign {

/// Every knob of a pipeline run. Defaults follow the reference calibration
/// protocol scaled to a toy model: 32 sequences, ridge eps 1e-6, and a
/// sequence length of 256 instead of 2048.
struct RunConfig {
    sim::ModelConfig model;

    struct Pruning {
        pruning::Criterion criterion = pruning::Criterion::streamline_cosine;
        std::size_t n = 3;
        pruning::CosineMode cosine = pruning::CosineMode::per_token;
        pruning::RemovalMetric removal_metric = pruning::RemovalMetric::mse;
    } pruning;

    struct Fit {
        std::vector<recovery::Method> methods{recovery::Method::identity, recovery::Method::diag,
                                              recovery::Method::rotate, recovery::Method::ghost};
        recovery::Solver solver = recovery::Solver::ridge_normal;
        /// Ridge coefficient for the normal-equation solver.
        double eps = recovery::kDefaultEps;
        /// Relative singular-value cutoff for the SVD solver.
        double svd_eps = recovery::kDefaultEps;

        double eps_for(recovery::Solver s) const noexcept {
            return s == recovery::Solver::svd_pinv ? svd_eps : eps;
        }
    } fit;

    struct Calibration {
        std::size_t num_sequences = 32;
        std::size_t seq_len = 256;
        std::uint64_t seed = 1;
    } calibration;

    struct Eval {
        std::size_t heldout_tokens = 2048;
        std::uint64_t heldout_seed = 2;
    } eval;

    struct Paths {
        std::string workdir;
    } paths;
};

/// Missing keys take their defaults; unknown keys and out-of-range values
/// throw ConfigError naming the dotted key (e.g. "fit.eps"). A rotate method
/// on a non-power-of-two width throws UnsupportedDimensionError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig parse_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

/// Range and cross-field checks shared by parse_config and CLI overrides.
void validate(const RunConfig& c);

}  // namespace ghostalign
