// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ghostalign/matrix.hpp"

namespace ghostalign::sim {

/// Rows are flattened tokens, columns are hidden channels.
using ActivationMatrix = Matrix;

/// Everything needed to rebuild a ToyModel bit-for-bit.
struct ModelConfig {
    std::size_t num_layers = 12;
    std::size_t hidden_dim = 64;
    std::uint64_t seed = 7;
    /// Weight of the shared low-rank component in sampled inputs; 0 gives
    /// isotropic Gaussian tokens.
    double structure_mix = 0.5;
    std::size_t vocab_size = 32;
};

nlohmann::json to_json(const ModelConfig& c);
/// Unknown keys are rejected with a ConfigError naming "model.<key>".
ModelConfig model_config_from_json(const nlohmann::json& j);

enum class LayerKind { mlp, linear };

/// One residual update f(x).
///
///   mlp:    f(x) = tanh(rmsnorm(x) ⊙ gain · w_in) · w_out
///   linear: f(x) = x · w_lin
///
/// Row-vector convention throughout: a layer maps T x C to T x C.
struct LayerParams {
    LayerKind kind = LayerKind::mlp;
    std::vector<double> gain;  // C
    Matrix w_in;               // C x 2C
    Matrix w_out;              // 2C x C
    Matrix w_lin;              // C x C, linear layers only
};

struct ToyModel {
    ModelConfig config;
    std::vector<LayerParams> layers;
    Matrix output_head;      // C x vocab
    Matrix input_structure;  // rank x C, rank = max(1, C / 8)

    std::size_t num_layers() const noexcept { return layers.size(); }
    std::size_t hidden_dim() const noexcept { return config.hidden_dim; }
    std::string model_id() const;
};

/// Contiguous pruned block {start, ..., start + count - 1}.
class BoundarySpec {
public:
    /// Throws ShapeError unless count >= 1.
    BoundarySpec(std::size_t start, std::size_t count);

    std::size_t start() const noexcept { return start_; }
    std::size_t count() const noexcept { return count_; }
    std::size_t post() const noexcept { return start_ + count_; }

    /// Throws ShapeError if the block does not fit in `num_layers`.
    void check_fits(std::size_t num_layers) const;

    friend bool operator==(const BoundarySpec&, const BoundarySpec&) = default;

private:
    std::size_t start_;
    std::size_t count_;
};

/// Parses "START:COUNT".
BoundarySpec parse_boundary_spec(const std::string& text);
std::string to_string(const BoundarySpec& spec);

/// Boundary activations of the dense model; the gap is derived on access.
struct ActivationPair {
    ActivationMatrix pre;
    ActivationMatrix post;

    ActivationMatrix gap() const { return post - pre; }
};

/// Throws ShapeError unless num_layers >= 2 and hidden_dim >= 2. Runs a norm
/// audit on 256 unit-normal tokens and throws NumericalError if some layer's
/// relative update norm leaves (0, 1].
ToyModel build_toy_model(const ModelConfig& config);
ToyModel build_toy_model(std::size_t num_layers, std::size_t hidden_dim, std::uint64_t seed);

/// Test fixture: the layers of `block` become linear maps x ↦ x · (I + B)
/// with small random B, so the block output is exactly X_pre · A.
ToyModel make_linear_block_model(const ModelConfig& config, const BoundarySpec& block);
/// Product of (I + B_k) over the linear layers of `block`.
Matrix linear_block_map(const ToyModel& model, const BoundarySpec& block);
/// Copy of `model` whose layers [start, start + count) produce f(x) = 0.
ToyModel with_zeroed_layers(const ToyModel& model, std::size_t start, std::size_t count);

/// f⁽ℓ⁾(x) for every row of x.
Matrix layer_update(const LayerParams& layer, const Matrix& x);

/// Per-layer ‖f⁽ℓ⁾(x)‖_F / ‖x‖_F with x freshly drawn unit-normal tokens.
std::vector<double> layer_update_ratios(const ToyModel& model, std::size_t tokens, std::uint64_t seed);

/// Calibration / evaluation tokens: i.i.d. unit normal rows plus
/// structure_mix · (z · input_structure) with z ~ N(0, I_rank).
Matrix sample_inputs(const ToyModel& model, std::size_t tokens, std::uint64_t seed);
/// i.i.d. N(0, 1) entries.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// Runs layers [first, last) on x.
Matrix run_layers(const ToyModel& model, Matrix x, std::size_t first, std::size_t last);

/// Applies all layers.
Matrix dense_forward(const ToyModel& model, const Matrix& inputs);

/// Hidden state entering every layer plus the final output: L + 1 matrices.
std::vector<Matrix> capture_all_states(const ToyModel& model, const Matrix& inputs);

/// Pre-hook captures on the unpruned model at layers spec.start() and
/// spec.post() (the latter is the final output when post == L).
ActivationPair forward_capture(const ToyModel& model, const Matrix& inputs, const BoundarySpec& spec);

/// Maps the hidden state handed across a pruning boundary.
using BoundaryMap = std::function<Matrix(const Matrix&)>;

struct PrunedRegion {
    BoundarySpec spec;
    BoundaryMap op;  // empty means identity
};

/// Skips every region's layers, applying its operator to the hidden state at
/// the boundary. Regions must be disjoint; they may be given in any order.
Matrix forward_pruned(const ToyModel& model, const Matrix& inputs, std::span<const PrunedRegion> regions);
Matrix forward_pruned(const ToyModel& model, const Matrix& inputs, const BoundarySpec& spec,
                      const BoundaryMap& op = {});

/// Final hidden state times the output head.
Matrix logits(const ToyModel& model, const Matrix& hidden);

/// Splits a sorted-or-not set of layer indices into maximal contiguous runs.
std::vector<BoundarySpec> regions_from_layers(std::vector<std::size_t> layers);

}  // namespace ghostalign::sim
