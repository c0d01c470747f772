// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ghostalign/recovery.hpp"
#include "ghostalign/simulator.hpp"

namespace ghostalign::analysis {

enum class Split { calibration, heldout };

std::string to_string(Split s);

struct EvalReport {
    std::string method;
    double boundary_mae = 0.0;
    std::vector<double> per_channel_mae;
    double alignment_residual = 0.0;
    double end_to_end_mse = 0.0;
    std::uint64_t token_count = 0;
    Split split = Split::heldout;
};

nlohmann::json to_json(const EvalReport& r);
/// "channel,mae" rows.
std::string per_channel_csv(const EvalReport& r);

/// Mean of |target − received| over all entries.
double boundary_mae(const Matrix& x_target, const Matrix& x_received);
/// Entry j is the token mean of |target_tj − received_tj|.
std::vector<double> per_channel_mae(const Matrix& x_target, const Matrix& x_received);
double mean_squared_error(const Matrix& a, const Matrix& b);

/// One pruned region, its operator and the dense-model calibration pair the
/// operator was fitted on.
struct RegionEval {
    sim::BoundarySpec spec;
    recovery::Operator op;
    sim::ActivationPair calibration;
};

/// Boundary metrics compare apply_operator(X_pre) with the dense X_post,
/// taken from the calibration pair or captured on `heldout_inputs` depending
/// on `split`. end_to_end_mse always compares dense_forward against
/// forward_pruned on `heldout_inputs`. With several regions the boundary
/// rows of all regions are pooled.
EvalReport evaluate_regions(const sim::ToyModel& model, const std::vector<RegionEval>& regions,
                            const Matrix& heldout_inputs, Split split = Split::heldout,
                            const std::string& method = "");

EvalReport evaluate_method(const sim::ToyModel& model, const sim::BoundarySpec& spec,
                           const recovery::Operator& op, const sim::ActivationPair& calib,
                           const Matrix& heldout_inputs, Split split = Split::heldout,
                           const std::string& method = "");

struct SweepOptions {
    std::vector<std::size_t> sizes{16, 32, 64, 128};
    std::size_t seq_len = 256;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::size_t heldout_tokens = 2048;
    std::uint64_t heldout_seed = 1'000'003;
    recovery::Solver solver = recovery::Solver::ridge_normal;
    double eps = recovery::kDefaultEps;
};

struct SweepCell {
    std::size_t size = 0;
    std::uint64_t seed = 0;
    /// Calibration-split alignment residual of the ghost operator.
    double residual = 0.0;
    /// Held-out end-to-end MSE.
    double mse = 0.0;
};

struct SweepSummary {
    std::size_t size = 0;
    double residual_mean = 0.0;
    double residual_std = 0.0;
    double mse_mean = 0.0;
    double mse_std = 0.0;
};

struct SweepReport {
    std::vector<SweepCell> cells;
    std::vector<SweepSummary> summary;
};

/// For every (size, seed), fits a ghost operator on size x seq_len tokens
/// and evaluates it against one fixed held-out split.
SweepReport calibration_sweep(const sim::ToyModel& model, const sim::BoundarySpec& spec,
                              const SweepOptions& options);

/// "size,seed,residual,mse" rows.
std::string sweep_csv(const SweepReport& r);
nlohmann::json to_json(const SweepReport& r);

}  // namespace ghostalign::analysis
