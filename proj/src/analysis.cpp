// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ghostalign/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ghostalign/error.hpp"

namespace ghostalign::analysis {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

// Round-trip precision.
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void mean_std(const std::vector<double>& v, double& mean, double& stddev) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    stddev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace

std::string to_string(Split s) { return s == Split::calibration ? "calibration" : "heldout"; }

nlohmann::json to_json(const EvalReport& r) {
    return {{"method", r.method},
            {"boundary_mae", r.boundary_mae},
            {"per_channel_mae", r.per_channel_mae},
            {"alignment_residual", r.alignment_residual},
            {"end_to_end_mse", r.end_to_end_mse},
            {"token_count", r.token_count},
            {"split", to_string(r.split)}};
}

std::string per_channel_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "channel,mae\n";
    for (std::size_t j = 0; j < r.per_channel_mae.size(); ++j) out << j << "," << fmt(r.per_channel_mae[j]) << "\n";
    return out.str();
}

double boundary_mae(const Matrix& x_target, const Matrix& x_received) {
    check_same_shape(x_target, x_received);
    if (x_target.size() == 0) throw ShapeError("boundary MAE of an empty matrix");
    double sum = 0.0;
    auto a = x_target.values();
    auto b = x_received.values();
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return sum / static_cast<double>(a.size());
}

std::vector<double> per_channel_mae(const Matrix& x_target, const Matrix& x_received) {
    check_same_shape(x_target, x_received);
    if (x_target.rows() == 0) throw ShapeError("per-channel MAE needs at least one token");
    std::vector<double> out(x_target.cols(), 0.0);
    for (std::size_t t = 0; t < x_target.rows(); ++t) {
        const auto a = x_target.row(t);
        const auto b = x_received.row(t);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += std::abs(a[j] - b[j]);
    }
    for (double& v : out) v /= static_cast<double>(x_target.rows());
    return out;
}

double mean_squared_error(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b);
    if (a.size() == 0) return 0.0;
    double s = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
    return s / static_cast<double>(av.size());
}

EvalReport evaluate_regions(const sim::ToyModel& model, const std::vector<RegionEval>& regions,
                            const Matrix& heldout_inputs, Split split, const std::string& method) {
    if (regions.empty()) throw ShapeError("evaluation needs at least one pruned region");
    if (heldout_inputs.cols() != model.hidden_dim()) throw ShapeError("held-out inputs do not match the model width");

    std::vector<Matrix> targets;
    std::vector<Matrix> received;
    std::vector<sim::PrunedRegion> pruned;
    for (const RegionEval& r : regions) {
        r.spec.check_fits(model.num_layers());
        const sim::ActivationPair boundary =
            split == Split::calibration ? r.calibration : sim::forward_capture(model, heldout_inputs, r.spec);
        received.push_back(recovery::apply_operator(boundary.pre, r.op));
        targets.push_back(boundary.post);
        pruned.push_back({r.spec, recovery::as_boundary_map(r.op)});
    }
    const Matrix target = targets.size() == 1 ? targets.front() : vstack(targets);
    const Matrix got = received.size() == 1 ? received.front() : vstack(received);

    EvalReport report;
    report.method = method;
    report.split = split;
    report.token_count = target.rows();
    report.per_channel_mae = per_channel_mae(target, got);
    report.boundary_mae = boundary_mae(target, got);
    report.alignment_residual = frobenius_norm(got - target);
    report.end_to_end_mse =
        mean_squared_error(sim::dense_forward(model, heldout_inputs), sim::forward_pruned(model, heldout_inputs, pruned));
    return report;
}

EvalReport evaluate_method(const sim::ToyModel& model, const sim::BoundarySpec& spec, const recovery::Operator& op,
                           const sim::ActivationPair& calib, const Matrix& heldout_inputs, Split split,
                           const std::string& method) {
    return evaluate_regions(model, {RegionEval{spec, op, calib}}, heldout_inputs, split, method);
}

SweepReport calibration_sweep(const sim::ToyModel& model, const sim::BoundarySpec& spec, const SweepOptions& options) {
    if (options.sizes.empty()) throw DomainError("calibration sweep needs at least one size");
    if (options.seeds.empty()) throw DomainError("calibration sweep needs at least one seed");
    if (options.seq_len < 1) throw DomainError("seq_len must be >= 1");
    for (std::size_t s : options.sizes)
        if (s < 1) throw DomainError("calibration sizes must be >= 1");
    spec.check_fits(model.num_layers());

    const Matrix heldout = sim::sample_inputs(model, options.heldout_tokens, options.heldout_seed);
    const Matrix dense = sim::dense_forward(model, heldout);

    SweepReport report;
    for (std::size_t size : options.sizes) {
        std::vector<double> residuals;
        std::vector<double> mses;
        for (std::uint64_t seed : options.seeds) {
            const Matrix calib = sim::sample_inputs(model, size * options.seq_len, seed);
            const sim::ActivationPair pair = sim::forward_capture(model, calib, spec);
            const recovery::Operator op = recovery::fit_ghost(pair, options.eps, options.solver);
            SweepCell cell;
            cell.size = size;
            cell.seed = seed;
            cell.residual = recovery::alignment_residual(pair, op);
            cell.mse = mean_squared_error(dense, sim::forward_pruned(model, heldout, spec, recovery::as_boundary_map(op)));
            residuals.push_back(cell.residual);
            mses.push_back(cell.mse);
            report.cells.push_back(cell);
        }
        SweepSummary s;
        s.size = size;
        mean_std(residuals, s.residual_mean, s.residual_std);
        mean_std(mses, s.mse_mean, s.mse_std);
        report.summary.push_back(s);
    }
    return report;
}

std::string sweep_csv(const SweepReport& r) {
    std::ostringstream out;
    out << "size,seed,residual,mse\n";
    for (const SweepCell& c : r.cells) out << c.size << "," << c.seed << "," << fmt(c.residual) << "," << fmt(c.mse) << "\n";
    return out.str();
}

nlohmann::json to_json(const SweepReport& r) {
    nlohmann::json cells = nlohmann::json::array();
    for (const SweepCell& c : r.cells)
        cells.push_back({{"size", c.size}, {"seed", c.seed}, {"residual", c.residual}, {"mse", c.mse}});
    nlohmann::json summary = nlohmann::json::array();
    for (const SweepSummary& s : r.summary) {
        summary.push_back({{"size", s.size},
                           {"residual_mean", s.residual_mean},
                           {"residual_std", s.residual_std},
                           {"mse_mean", s.mse_mean},
                           {"mse_std", s.mse_std}});
    }
    return {{"cells", cells}, {"summary", summary}};
}

}  // namespace ghostalign::analysis
