// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ghostalign/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ghostalign/error.hpp"

namespace ghostalign::pruning {

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
    double ab = 0.0;
    double aa = 0.0;
    double bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 && bb == 0.0) return 1.0;
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

void check_n(std::size_t n, std::size_t num_layers) {
    if (n < 1 || n >= num_layers) {
        throw DomainError("n must lie in [1, " + std::to_string(num_layers - 1) + "], got " + std::to_string(n));
    }
}

// Indices of the n smallest scores, ties to the lowest index, returned ascending.
std::vector<std::size_t> n_smallest(const std::vector<double>& scores, std::size_t n) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<double> softmax_row(std::span<const double> z) {
    const double zmax = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) sum += (p[i] = std::exp(z[i] - zmax));
    for (double& v : p) v /= sum;
    return p;
}

double mean_kl(const Matrix& dense_logits, const Matrix& pruned_logits) {
    double total = 0.0;
    for (std::size_t t = 0; t < dense_logits.rows(); ++t) {
        const auto zp = dense_logits.row(t);
        const auto zq = pruned_logits.row(t);
        const auto p = softmax_row(zp);
        // log q_i = zq_i - logsumexp(zq)
        const double qmax = *std::max_element(zq.begin(), zq.end());
        double qsum = 0.0;
        for (double v : zq) qsum += std::exp(v - qmax);
        const double q_lse = qmax + std::log(qsum);
        const double pmax = *std::max_element(zp.begin(), zp.end());
        double psum = 0.0;
        for (double v : zp) psum += std::exp(v - pmax);
        const double p_lse = pmax + std::log(psum);
        double kl = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) kl += p[i] * ((zp[i] - p_lse) - (zq[i] - q_lse));
        total += std::max(kl, 0.0);
    }
    return dense_logits.rows() > 0 ? total / static_cast<double>(dense_logits.rows()) : 0.0;
}

double mean_squared_error(const Matrix& a, const Matrix& b) {
    const Matrix d = a - b;
    double s = 0.0;
    for (double v : d.values()) s += v * v;
    return d.size() > 0 ? s / static_cast<double>(d.size()) : 0.0;
}

}  // namespace

std::string to_string(Criterion c) {
    switch (c) {
        case Criterion::streamline_cosine:
            return "streamline_cosine";
        case Criterion::block_influence:
            return "block_influence";
        case Criterion::removal_loss:
            return "removal_loss";
    }
    return "unknown";
}

Criterion parse_criterion(const std::string& s) {
    if (s == "streamline_cosine") return Criterion::streamline_cosine;
    if (s == "block_influence") return Criterion::block_influence;
    if (s == "removal_loss") return Criterion::removal_loss;
    throw ConfigError("pruning.criterion", "unknown criterion '" + s + "'");
}

std::string to_string(CosineMode m) { return m == CosineMode::per_token ? "per_token" : "flattened"; }

CosineMode parse_cosine_mode(const std::string& s) {
    if (s == "per_token") return CosineMode::per_token;
    if (s == "flattened") return CosineMode::flattened;
    throw ConfigError("pruning.cosine", "unknown cosine mode '" + s + "'");
}

std::string to_string(RemovalMetric m) { return m == RemovalMetric::mse ? "mse" : "log_loss"; }

RemovalMetric parse_removal_metric(const std::string& s) {
    if (s == "mse") return RemovalMetric::mse;
    if (s == "log_loss") return RemovalMetric::log_loss;
    throw ConfigError("pruning.removal_metric", "unknown removal metric '" + s + "'");
}

nlohmann::json to_json(const LayerScores& s) {
    nlohmann::json j;
    j["criterion"] = to_string(s.criterion);
    j["scores"] = s.scores;
    if (s.chosen_block) {
        j["chosen"] = {{"start", s.chosen_block->start()}, {"count", s.chosen_block->count()}};
    } else {
        j["chosen"] = s.chosen_layers;
    }
    nlohmann::json meta;
    if (s.criterion == Criterion::removal_loss) {
        meta["removal_metric"] = to_string(s.metric);
    } else {
        meta["cosine"] = to_string(s.cosine);
    }
    j["metadata"] = meta;
    return j;
}

double mean_token_cosine(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("cosine needs equal shapes");
    if (a.rows() == 0) throw ShapeError("cosine needs at least one token");
    double sum = 0.0;
    for (std::size_t t = 0; t < a.rows(); ++t) sum += cosine(a.row(t), b.row(t));
    return sum / static_cast<double>(a.rows());
}

double flattened_cosine(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("cosine needs equal shapes");
    return cosine(a.values(), b.values());
}

LayerScores contiguous_block_scores(std::span<const Matrix> states, std::size_t n, CosineMode mode) {
    if (states.size() < 3) throw DomainError("need hidden states of at least two layers");
    const std::size_t num_layers = states.size() - 1;
    check_n(n, num_layers);

    LayerScores out;
    out.criterion = Criterion::streamline_cosine;
    out.cosine = mode;
    std::size_t best = 0;
    for (std::size_t s = 0; s + n <= num_layers; ++s) {
        const double score = mode == CosineMode::per_token ? mean_token_cosine(states[s], states[s + n])
                                                           : flattened_cosine(states[s], states[s + n]);
        out.scores.push_back(score);
        if (score > out.scores[best]) best = s;
    }
    out.chosen_block = sim::BoundarySpec(best, n);
    out.chosen_layers.resize(n);
    std::iota(out.chosen_layers.begin(), out.chosen_layers.end(), best);
    return out;
}

LayerScores select_contiguous_block(const sim::ToyModel& model, const Matrix& calib, std::size_t n,
                                    CosineMode mode) {
    check_n(n, model.num_layers());
    const auto states = sim::capture_all_states(model, calib);
    return contiguous_block_scores(states, n, mode);
}

LayerScores block_influence_scores(const sim::ToyModel& model, const Matrix& calib, std::size_t n) {
    if (calib.rows() == 0) throw ShapeError("block influence needs calibration tokens");
    check_n(n, model.num_layers());
    LayerScores out;
    out.criterion = Criterion::block_influence;
    Matrix x = sim::run_layers(model, calib, 0, 0);
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        Matrix next = sim::run_layers(model, x, l, l + 1);
        out.scores.push_back(1.0 - mean_token_cosine(x, next));
        x = std::move(next);
    }
    out.chosen_layers = n_smallest(out.scores, n);
    return out;
}

LayerScores select_by_removal_loss(const sim::ToyModel& model, const Matrix& eval_inputs, std::size_t n,
                                   RemovalMetric metric) {
    if (eval_inputs.rows() == 0) throw ShapeError("removal loss needs evaluation tokens");
    check_n(n, model.num_layers());
    LayerScores out;
    out.criterion = Criterion::removal_loss;
    out.metric = metric;

    const Matrix dense = sim::dense_forward(model, eval_inputs);
    const Matrix dense_logits = metric == RemovalMetric::log_loss ? sim::logits(model, dense) : Matrix{};
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const Matrix skipped = sim::forward_pruned(model, eval_inputs, sim::BoundarySpec(l, 1));
        out.scores.push_back(metric == RemovalMetric::mse ? mean_squared_error(skipped, dense)
                                                          : mean_kl(dense_logits, sim::logits(model, skipped)));
    }
    out.chosen_layers = n_smallest(out.scores, n);
    return out;
}

}  // namespace ghostalign::pruning
