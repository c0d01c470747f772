// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ghostalign/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "ghostalign/error.hpp"

namespace ghostalign::sim {

namespace {

constexpr double kRmsEps = 1e-6;
constexpr std::size_t kAuditTokens = 256;
constexpr std::uint64_t kAuditSeed = 0x5eedULL;

// Independent streams per purpose so that adding a layer never reshuffles
// the weights of earlier layers.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index)};
    return std::mt19937_64(seq);
}

Matrix normal_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(rows * cols);
    for (double& x : v) x = scale * normal(rng);
    return Matrix(rows, cols, std::move(v));
}

enum Purpose : std::uint64_t { kLayer = 1, kHead = 2, kStructure = 3, kInputs = 4, kLinear = 5, kGaussian = 6 };

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
    return {{"num_layers", c.num_layers},
            {"hidden_dim", c.hidden_dim},
            {"seed", c.seed},
            {"structure_mix", c.structure_mix},
            {"vocab_size", c.vocab_size}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model", "expected an object");
    ModelConfig c;
    for (const auto& [key, value] : j.items()) {
        const std::string path = "model." + key;
        try {
            if (key == "num_layers") {
                c.num_layers = value.get<std::size_t>();
            } else if (key == "hidden_dim") {
                c.hidden_dim = value.get<std::size_t>();
            } else if (key == "seed") {
                c.seed = value.get<std::uint64_t>();
            } else if (key == "structure_mix") {
                c.structure_mix = value.get<double>();
            } else if (key == "vocab_size") {
                c.vocab_size = value.get<std::size_t>();
            } else {
                throw ConfigError(path, "unknown key");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path, e.what());
        }
        if ((key == "num_layers" || key == "hidden_dim" || key == "seed" || key == "vocab_size") &&
            (!value.is_number_integer() || (!value.is_number_unsigned() && value.get<std::int64_t>() < 0))) {
            throw ConfigError(path, "expected a non-negative integer");
        }
    }
    if (c.num_layers < 2) throw ConfigError("model.num_layers", "must be >= 2");
    if (c.hidden_dim < 2) throw ConfigError("model.hidden_dim", "must be >= 2");
    if (c.vocab_size < 1) throw ConfigError("model.vocab_size", "must be >= 1");
    if (!(c.structure_mix >= 0.0) || !std::isfinite(c.structure_mix))
        throw ConfigError("model.structure_mix", "must be finite and >= 0");
    return c;
}

std::string ToyModel::model_id() const {
    return "toy-L" + std::to_string(config.num_layers) + "-C" + std::to_string(config.hidden_dim) + "-s" +
           std::to_string(config.seed);
}

BoundarySpec::BoundarySpec(std::size_t start, std::size_t count) : start_(start), count_(count) {
    if (count_ < 1) throw ShapeError("a pruned block needs at least one layer");
}

void BoundarySpec::check_fits(std::size_t num_layers) const {
    if (post() > num_layers) {
        throw ShapeError("block " + to_string(*this) + " exceeds a " + std::to_string(num_layers) + "-layer model");
    }
}

BoundarySpec parse_boundary_spec(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ConfigError("spec", "expected START:COUNT, got '" + text + "'");
    try {
        std::size_t used = 0;
        const auto start = std::stoull(text.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument(text);
        const auto rest = text.substr(colon + 1);
        const auto count = std::stoull(rest, &used);
        if (used != rest.size()) throw std::invalid_argument(text);
        if (count < 1) throw ConfigError("spec", "COUNT must be >= 1");
        return BoundarySpec(start, count);
    } catch (const std::logic_error&) {
        throw ConfigError("spec", "expected START:COUNT, got '" + text + "'");
    }
}

std::string to_string(const BoundarySpec& spec) {
    return std::to_string(spec.start()) + ":" + std::to_string(spec.count());
}

ToyModel build_toy_model(const ModelConfig& config) {
    if (config.num_layers < 2) throw ShapeError("toy model needs at least 2 layers");
    if (config.hidden_dim < 2) throw ShapeError("toy model needs hidden_dim >= 2");
    const std::size_t c = config.hidden_dim;
    const std::size_t ff = 2 * c;
    const double scale = 0.5 / std::sqrt(static_cast<double>(ff));

    ToyModel model;
    model.config = config;
    model.layers.reserve(config.num_layers);
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        auto rng = stream(config.seed, kLayer, l);
        LayerParams layer;
        std::normal_distribution<double> normal(0.0, 1.0);
        layer.gain.resize(c);
        for (double& g : layer.gain) g = 1.0 + 0.1 * normal(rng);
        layer.w_in = normal_matrix(rng, c, ff, scale);
        layer.w_out = normal_matrix(rng, ff, c, scale);
        model.layers.push_back(std::move(layer));
    }
    auto head_rng = stream(config.seed, kHead);
    model.output_head = normal_matrix(head_rng, c, config.vocab_size, 1.0 / std::sqrt(static_cast<double>(c)));
    auto structure_rng = stream(config.seed, kStructure);
    model.input_structure = normal_matrix(structure_rng, std::max<std::size_t>(1, c / 8), c, 1.0);

    const auto ratios = layer_update_ratios(model, kAuditTokens, kAuditSeed);
    for (std::size_t l = 0; l < ratios.size(); ++l) {
        if (!(ratios[l] > 0.0 && ratios[l] <= 1.0)) {
            throw NumericalError("layer " + std::to_string(l) + " update norm ratio " + std::to_string(ratios[l]) +
                                 " is outside (0, 1]");
        }
    }
    return model;
}

ToyModel build_toy_model(std::size_t num_layers, std::size_t hidden_dim, std::uint64_t seed) {
    ModelConfig config;
    config.num_layers = num_layers;
    config.hidden_dim = hidden_dim;
    config.seed = seed;
    return build_toy_model(config);
}

ToyModel make_linear_block_model(const ModelConfig& config, const BoundarySpec& block) {
    ToyModel model = build_toy_model(config);
    block.check_fits(model.num_layers());
    const std::size_t c = config.hidden_dim;
    for (std::size_t l = block.start(); l < block.post(); ++l) {
        auto rng = stream(config.seed, kLinear, l);
        LayerParams& layer = model.layers[l];
        layer.kind = LayerKind::linear;
        layer.w_lin = normal_matrix(rng, c, c, 0.3 / std::sqrt(static_cast<double>(c)));
    }
    return model;
}

Matrix linear_block_map(const ToyModel& model, const BoundarySpec& block) {
    block.check_fits(model.num_layers());
    const std::size_t c = model.hidden_dim();
    Matrix a = Matrix::identity(c);
    for (std::size_t l = block.start(); l < block.post(); ++l) {
        const LayerParams& layer = model.layers[l];
        if (layer.kind != LayerKind::linear)
            throw ShapeError("layer " + std::to_string(l) + " of block " + to_string(block) + " is not linear");
        a = matmul(a, Matrix::identity(c) + layer.w_lin);
    }
    return a;
}

ToyModel with_zeroed_layers(const ToyModel& model, std::size_t start, std::size_t count) {
    BoundarySpec(start, count).check_fits(model.num_layers());
    ToyModel out = model;
    for (std::size_t l = start; l < start + count; ++l) {
        LayerParams& layer = out.layers[l];
        layer.w_out = Matrix(layer.w_out.rows(), layer.w_out.cols());
        if (layer.kind == LayerKind::linear) layer.w_lin = Matrix(layer.w_lin.rows(), layer.w_lin.cols());
    }
    return out;
}

Matrix layer_update(const LayerParams& layer, const Matrix& x) {
    if (layer.kind == LayerKind::linear) return matmul(x, layer.w_lin);

    const std::size_t c = x.cols();
    if (c != layer.gain.size()) throw ShapeError("layer expects " + std::to_string(layer.gain.size()) + " channels");
    Matrix normed(x.rows(), c);
    for (std::size_t t = 0; t < x.rows(); ++t) {
        const auto in = x.row(t);
        double ms = 0.0;
        for (double v : in) ms += v * v;
        const double inv_rms = 1.0 / std::sqrt(ms / static_cast<double>(c) + kRmsEps);
        auto out = normed.row(t);
        for (std::size_t j = 0; j < c; ++j) out[j] = in[j] * inv_rms * layer.gain[j];
    }
    Matrix hidden = matmul(normed, layer.w_in);
    for (double& v : hidden.values()) v = std::tanh(v);
    return matmul(hidden, layer.w_out);
}

std::vector<double> layer_update_ratios(const ToyModel& model, std::size_t tokens, std::uint64_t seed) {
    const Matrix x = gaussian_matrix(tokens, model.hidden_dim(), seed);
    const double xn = frobenius_norm(x);
    std::vector<double> ratios;
    ratios.reserve(model.num_layers());
    for (const LayerParams& layer : model.layers) ratios.push_back(frobenius_norm(layer_update(layer, x)) / xn);
    return ratios;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    auto rng = stream(seed, kGaussian);
    return normal_matrix(rng, rows, cols, 1.0);
}

Matrix sample_inputs(const ToyModel& model, std::size_t tokens, std::uint64_t seed) {
    auto rng = stream(seed, kInputs, model.config.seed);
    const std::size_t c = model.hidden_dim();
    Matrix x = normal_matrix(rng, tokens, c, 1.0);
    if (model.config.structure_mix == 0.0) return x;
    const Matrix z = normal_matrix(rng, tokens, model.input_structure.rows(), 1.0);
    return x + model.config.structure_mix * matmul(z, model.input_structure);
}

Matrix run_layers(const ToyModel& model, Matrix x, std::size_t first, std::size_t last) {
    if (x.cols() != model.hidden_dim()) {
        throw ShapeError("inputs have " + std::to_string(x.cols()) + " channels, model has " +
                         std::to_string(model.hidden_dim()));
    }
    if (first > last || last > model.num_layers()) throw ShapeError("layer range out of bounds");
    for (std::size_t l = first; l < last; ++l) x = x + layer_update(model.layers[l], x);
    return x;
}

Matrix dense_forward(const ToyModel& model, const Matrix& inputs) {
    return run_layers(model, inputs, 0, model.num_layers());
}

std::vector<Matrix> capture_all_states(const ToyModel& model, const Matrix& inputs) {
    std::vector<Matrix> states;
    states.reserve(model.num_layers() + 1);
    states.push_back(run_layers(model, inputs, 0, 0));
    for (std::size_t l = 0; l < model.num_layers(); ++l) states.push_back(run_layers(model, states.back(), l, l + 1));
    return states;
}

ActivationPair forward_capture(const ToyModel& model, const Matrix& inputs, const BoundarySpec& spec) {
    spec.check_fits(model.num_layers());
    Matrix pre = run_layers(model, inputs, 0, spec.start());
    Matrix post = run_layers(model, pre, spec.start(), spec.post());
    return {std::move(pre), std::move(post)};
}

Matrix forward_pruned(const ToyModel& model, const Matrix& inputs, std::span<const PrunedRegion> regions) {
    std::vector<const PrunedRegion*> ordered;
    for (const PrunedRegion& r : regions) {
        r.spec.check_fits(model.num_layers());
        ordered.push_back(&r);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const PrunedRegion* a, const PrunedRegion* b) { return a->spec.start() < b->spec.start(); });
    for (std::size_t i = 1; i < ordered.size(); ++i) {
        if (ordered[i]->spec.start() < ordered[i - 1]->spec.post())
            throw ShapeError("pruned regions " + to_string(ordered[i - 1]->spec) + " and " +
                             to_string(ordered[i]->spec) + " overlap");
    }

    Matrix x = run_layers(model, inputs, 0, 0);
    std::size_t layer = 0;
    for (const PrunedRegion* r : ordered) {
        x = run_layers(model, std::move(x), layer, r->spec.start());
        if (r->op) {
            Matrix mapped = r->op(x);
            if (mapped.rows() != x.rows() || mapped.cols() != x.cols())
                throw ShapeError("boundary operator changed the hidden-state shape");
            x = std::move(mapped);
        }
        layer = r->spec.post();
    }
    return run_layers(model, std::move(x), layer, model.num_layers());
}

Matrix forward_pruned(const ToyModel& model, const Matrix& inputs, const BoundarySpec& spec, const BoundaryMap& op) {
    const PrunedRegion region{spec, op};
    return forward_pruned(model, inputs, std::span<const PrunedRegion>(&region, 1));
}

Matrix logits(const ToyModel& model, const Matrix& hidden) { return matmul(hidden, model.output_head); }

std::vector<BoundarySpec> regions_from_layers(std::vector<std::size_t> layers) {
    std::sort(layers.begin(), layers.end());
    layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
    std::vector<BoundarySpec> out;
    for (std::size_t i = 0; i < layers.size();) {
        std::size_t j = i + 1;
        while (j < layers.size() && layers[j] == layers[j - 1] + 1) ++j;
        out.emplace_back(layers[i], j - i);
        i = j;
    }
    return out;
}

}  // namespace ghostalign::sim
