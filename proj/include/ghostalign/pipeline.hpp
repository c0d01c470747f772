// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ghostalign/analysis.hpp"
#include "ghostalign/config.hpp"
#include "ghostalign/error.hpp"
#include "ghostalign/pruning.hpp"
#include "ghostalign/recovery.hpp"

namespace ghostalign::pipeline {

/// Error raised inside a pipeline stage; keeps the original category so the
/// exit code is unchanged and prefixes the message with "[stage]".
class StageError : public Error {
public:
    StageError(const std::string& stage, const Error& cause)
        : Error(cause.category(), "[" + stage + "] " + cause.what()), stage_(stage) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Runs `fn`, rethrowing library errors as StageError tagged with `stage`.
template <typename Fn>
decltype(auto) stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e);
    }
}

/// Workdir precedence: explicit flag, then config paths.workdir, then the
/// GHOSTALIGN_WORKDIR environment variable. Throws ConfigError if none is set.
std::filesystem::path resolve_workdir(const std::string& flag_value, const RunConfig& config);

/// Operator files are `<stem>.actb` holding a C x C matrix plus `<stem>.json`.
/// Ghost operators store M* (form "identity_plus", applied as x + x·M*);
/// every other method stores the dense W (form "dense").
struct LoadedOperator {
    recovery::Method method = recovery::Method::identity;
    recovery::Operator op;
    std::size_t hidden_dim = 0;
    nlohmann::json meta;
};

void write_operator(const std::filesystem::path& actb_path, recovery::Method method, const recovery::Operator& op,
                    std::size_t hidden_dim);
LoadedOperator read_operator(const std::filesystem::path& actb_path);

/// Calibration tokens for a config: num_sequences x seq_len rows.
Matrix calibration_inputs(const sim::ToyModel& model, const RunConfig& config);
Matrix heldout_inputs(const sim::ToyModel& model, const RunConfig& config, std::optional<std::uint64_t> seed = {});

/// Applies the configured criterion. removal_loss is scored on the
/// calibration tokens.
pruning::LayerScores select_layers(const sim::ToyModel& model, const Matrix& calib, const RunConfig& config);

/// Contiguous pruned regions from a selection.
std::vector<sim::BoundarySpec> regions_of(const pruning::LayerScores& scores);

/// Reads the chosen regions back from a scores.json document.
std::vector<sim::BoundarySpec> regions_from_scores_json(const nlohmann::json& j);

struct SummaryRow {
    std::string method;
    double calib_residual = 0.0;
    double heldout_residual = 0.0;
    double heldout_boundary_mae = 0.0;
    double end_to_end_mse = 0.0;
};

std::string summary_csv(const std::vector<SummaryRow>& rows);
/// Aligned plain-text rendering of the same table.
std::string summary_text(const std::vector<SummaryRow>& rows);

struct PipelineResult {
    std::filesystem::path workdir;
    std::vector<sim::BoundarySpec> regions;
    std::vector<SummaryRow> summary;
};

/// simulate → select → fit → eval for every configured method. Writes
/// config.effective.json, model.json, scores.json, the boundary dumps (at the
/// top level for one region, under region_<k>/ otherwise), operator and eval
/// files per method, and summary.csv / summary.txt. Refuses to reuse a
/// workdir that already holds a run unless `force` is set.
PipelineResult run_pipeline(const RunConfig& config, const std::filesystem::path& workdir, bool force);

/// Directory holding the dumps and operators of region `index`.
std::filesystem::path region_dir(const std::filesystem::path& workdir, std::size_t index, std::size_t region_count);

/// Rebuilds summary rows from eval_<method>.json and
/// eval_<method>_calibration.json files in a workdir.
std::vector<SummaryRow> collect_summary(const std::filesystem::path& workdir);

}  // namespace ghostalign::pipeline
