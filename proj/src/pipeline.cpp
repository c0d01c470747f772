// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ghostalign/pipeline.hpp"

#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <sstream>

#include "ghostalign/actdata.hpp"
#include "ghostalign/simulator.hpp"

namespace ghostalign::pipeline {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

constexpr recovery::Method kAllMethods[] = {recovery::Method::identity, recovery::Method::diag,
                                            recovery::Method::rotate, recovery::Method::ghost};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

fs::path with_json_extension(const fs::path& actb_path) {
    fs::path p = actb_path;
    p.replace_extension(".json");
    return p;
}

}  // namespace

fs::path resolve_workdir(const std::string& flag_value, const RunConfig& config) {
    if (!flag_value.empty()) return flag_value;
    if (!config.paths.workdir.empty()) return config.paths.workdir;
    if (const char* env = std::getenv("GHOSTALIGN_WORKDIR"); env != nullptr && *env != '\0') return env;
    throw ConfigError("paths.workdir", "no workdir given (use --workdir, paths.workdir or GHOSTALIGN_WORKDIR)");
}

void write_operator(const fs::path& actb_path, recovery::Method method, const recovery::Operator& op,
                    std::size_t hidden_dim) {
    Json meta;
    meta["method"] = recovery::to_string(method);
    meta["hidden_dim"] = hidden_dim;
    Matrix stored;
    if (const auto* g = std::get_if<recovery::GhostOperator>(&op)) {
        stored = g->m_star;
        meta["form"] = "identity_plus";
        meta["solver"] = recovery::to_string(g->solver);
        meta["eps"] = g->eps_used;
        meta["fit_residual"] = g->fit_residual;
        meta["token_count"] = g->token_count;
    } else {
        stored = recovery::dense_matrix(op, hidden_dim);
        meta["form"] = "dense";
        if (const auto* p = std::get_if<recovery::HadamardPatch>(&op)) {
            meta["d"] = p->d;
            meta["fit_residual"] = p->fit_residual;
        } else if (const auto* s = std::get_if<recovery::ChannelScale>(&op)) {
            meta["degenerate_channels"] = s->degenerate_channels;
            meta["fit_residual"] = s->fit_residual;
        }
    }
    actdata::write_actb(actb_path, stored, actdata::DType::f64);
    actdata::write_json_file(with_json_extension(actb_path), meta);
}

LoadedOperator read_operator(const fs::path& actb_path) {
    const Matrix stored = actdata::read_actb(actb_path);
    const Json meta = actdata::read_json_file(with_json_extension(actb_path));
    if (stored.rows() != stored.cols()) throw ShapeError("operator matrix in " + actb_path.string() + " is not square");
    LoadedOperator out;
    out.meta = meta;
    out.hidden_dim = stored.rows();
    if (!meta.contains("method") || !meta["method"].is_string()) throw FormatError("method", "missing operator method");
    out.method = recovery::parse_method(meta["method"].get<std::string>());
    const std::size_t c = stored.rows();
    switch (out.method) {
        case recovery::Method::identity:
            out.op = recovery::IdentityOperator{};
            break;
        case recovery::Method::ghost: {
            recovery::GhostOperator g;
            g.m_star = stored;
            g.solver = recovery::parse_solver(meta.value("solver", std::string("ridge")));
            g.eps_used = meta.value("eps", recovery::kDefaultEps);
            g.fit_residual = meta.value("fit_residual", 0.0);
            g.token_count = meta.value("token_count", std::uint64_t{0});
            out.op = std::move(g);
            break;
        }
        case recovery::Method::rotate: {
            recovery::HadamardPatch p;
            p.fused = stored;
            p.d = meta.value("d", std::vector<double>{});
            p.fit_residual = meta.value("fit_residual", 0.0);
            out.op = std::move(p);
            break;
        }
        case recovery::Method::diag: {
            recovery::ChannelScale s;
            s.s.resize(c);
            for (std::size_t j = 0; j < c; ++j) s.s[j] = stored(j, j);
            s.degenerate_channels = meta.value("degenerate_channels", std::vector<std::size_t>{});
            s.fit_residual = meta.value("fit_residual", 0.0);
            out.op = std::move(s);
            break;
        }
    }
    return out;
}

Matrix calibration_inputs(const sim::ToyModel& model, const RunConfig& config) {
    return sim::sample_inputs(model, config.calibration.num_sequences * config.calibration.seq_len,
                              config.calibration.seed);
}

Matrix heldout_inputs(const sim::ToyModel& model, const RunConfig& config, std::optional<std::uint64_t> seed) {
    return sim::sample_inputs(model, config.eval.heldout_tokens, seed.value_or(config.eval.heldout_seed));
}

pruning::LayerScores select_layers(const sim::ToyModel& model, const Matrix& calib, const RunConfig& config) {
    switch (config.pruning.criterion) {
        case pruning::Criterion::streamline_cosine:
            return pruning::select_contiguous_block(model, calib, config.pruning.n, config.pruning.cosine);
        case pruning::Criterion::block_influence:
            return pruning::block_influence_scores(model, calib, config.pruning.n);
        case pruning::Criterion::removal_loss:
            return pruning::select_by_removal_loss(model, calib, config.pruning.n, config.pruning.removal_metric);
    }
    throw ConfigError("pruning.criterion", "unhandled criterion");
}

std::vector<sim::BoundarySpec> regions_of(const pruning::LayerScores& scores) {
    if (scores.chosen_block) return {*scores.chosen_block};
    return sim::regions_from_layers(scores.chosen_layers);
}

std::vector<sim::BoundarySpec> regions_from_scores_json(const Json& j) {
    if (!j.contains("chosen")) throw FormatError("chosen", "scores.json has no selection");
    const Json& chosen = j["chosen"];
    if (chosen.is_object()) {
        return {sim::BoundarySpec(chosen.at("start").get<std::size_t>(), chosen.at("count").get<std::size_t>())};
    }
    if (chosen.is_array()) return sim::regions_from_layers(chosen.get<std::vector<std::size_t>>());
    throw FormatError("chosen", "expected {start, count} or a layer list");
}

fs::path region_dir(const fs::path& workdir, std::size_t index, std::size_t region_count) {
    return region_count == 1 ? workdir : workdir / ("region_" + std::to_string(index));
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream out;
    out << "method,calib_residual,heldout_residual,heldout_boundary_mae,end_to_end_mse\n";
    for (const SummaryRow& r : rows) {
        out << r.method << "," << fmt(r.calib_residual) << "," << fmt(r.heldout_residual) << ","
            << fmt(r.heldout_boundary_mae) << "," << fmt(r.end_to_end_mse) << "\n";
    }
    return out.str();
}

std::string summary_text(const std::vector<SummaryRow>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(10) << "method" << std::right << std::setw(16) << "calib_resid" << std::setw(16)
        << "heldout_resid" << std::setw(16) << "heldout_mae" << std::setw(16) << "e2e_mse" << "\n";
    for (const SummaryRow& r : rows) {
        out << std::left << std::setw(10) << r.method << std::right << std::setw(16) << fmt_short(r.calib_residual)
            << std::setw(16) << fmt_short(r.heldout_residual) << std::setw(16) << fmt_short(r.heldout_boundary_mae)
            << std::setw(16) << fmt_short(r.end_to_end_mse) << "\n";
    }
    return out.str();
}

PipelineResult run_pipeline(const RunConfig& config, const fs::path& workdir, bool force) {
    stage("config", [&] { validate(config); });

    stage("workdir", [&] {
        if (fs::exists(workdir / "model.json") && !force)
            throw ConfigError("paths.workdir", workdir.string() + " already holds a run; pass --force to overwrite");
        std::error_code ec;
        fs::create_directories(workdir, ec);
        if (ec) throw IoError(workdir.string(), ec.message());
        actdata::write_json_file(workdir / "config.effective.json", to_json(config));
    });

    const sim::ToyModel model = stage("simulate", [&] {
        auto m = sim::build_toy_model(config.model);
        actdata::write_json_file(workdir / "model.json", sim::to_json(config.model));
        return m;
    });
    const Matrix calib = calibration_inputs(model, config);

    const pruning::LayerScores scores = stage("select", [&] {
        auto s = select_layers(model, calib, config);
        actdata::write_json_file(workdir / "scores.json", pruning::to_json(s));
        return s;
    });

    PipelineResult result;
    result.workdir = workdir;
    result.regions = regions_of(scores);
    const std::size_t region_count = result.regions.size();

    std::vector<sim::ActivationPair> pairs = stage("simulate", [&] {
        std::vector<sim::ActivationPair> out;
        for (std::size_t k = 0; k < region_count; ++k) {
            const sim::BoundarySpec& spec = result.regions[k];
            out.push_back(sim::forward_capture(model, calib, spec));
            actdata::DumpMetadata meta;
            meta.model_id = model.model_id();
            meta.pre_layer = static_cast<std::int64_t>(spec.start());
            meta.post_layer = static_cast<std::int64_t>(spec.post());
            meta.seq_len = static_cast<std::int64_t>(config.calibration.seq_len);
            meta.num_sequences = static_cast<std::int64_t>(config.calibration.num_sequences);
            meta.token_count = meta.seq_len * meta.num_sequences;
            meta.seed = static_cast<std::int64_t>(config.calibration.seed);
            meta.source = actdata::DumpSource::simulator;
            actdata::write_calibration_pair(region_dir(workdir, k, region_count), out.back().pre, out.back().post,
                                            meta, actdata::DType::f64);
        }
        return out;
    });

    const Matrix heldout = heldout_inputs(model, config);
    const double eps = config.fit.eps_for(config.fit.solver);
    for (recovery::Method method : config.fit.methods) {
        const std::string name = recovery::to_string(method);
        std::vector<analysis::RegionEval> evals = stage("fit", [&] {
            std::vector<analysis::RegionEval> out;
            for (std::size_t k = 0; k < region_count; ++k) {
                auto op = recovery::fit_operator(pairs[k], method, config.fit.solver, eps);
                write_operator(region_dir(workdir, k, region_count) / ("operator_" + name + ".actb"), method, op,
                               model.hidden_dim());
                out.push_back({result.regions[k], std::move(op), pairs[k]});
            }
            return out;
        });
        stage("eval", [&] {
            const auto held = analysis::evaluate_regions(model, evals, heldout, analysis::Split::heldout, name);
            const auto cal = analysis::evaluate_regions(model, evals, heldout, analysis::Split::calibration, name);
            actdata::write_json_file(workdir / ("eval_" + name + ".json"), analysis::to_json(held));
            actdata::write_json_file(workdir / ("eval_" + name + "_calibration.json"), analysis::to_json(cal));
            actdata::write_text_file(workdir / ("eval_" + name + "_channels.csv"), analysis::per_channel_csv(held));
            result.summary.push_back(
                {name, cal.alignment_residual, held.alignment_residual, held.boundary_mae, held.end_to_end_mse});
        });
    }

    stage("report", [&] {
        actdata::write_text_file(workdir / "summary.csv", summary_csv(result.summary));
        actdata::write_text_file(workdir / "summary.txt", summary_text(result.summary));
    });
    return result;
}

std::vector<SummaryRow> collect_summary(const fs::path& workdir) {
    std::vector<SummaryRow> rows;
    for (recovery::Method m : kAllMethods) {
        const std::string name = recovery::to_string(m);
        const fs::path held = workdir / ("eval_" + name + ".json");
        if (!fs::exists(held)) continue;
        const Json h = actdata::read_json_file(held);
        SummaryRow row;
        row.method = name;
        row.heldout_residual = h.at("alignment_residual").get<double>();
        row.heldout_boundary_mae = h.at("boundary_mae").get<double>();
        row.end_to_end_mse = h.at("end_to_end_mse").get<double>();
        const fs::path cal = workdir / ("eval_" + name + "_calibration.json");
        if (fs::exists(cal)) row.calib_residual = actdata::read_json_file(cal).at("alignment_residual").get<double>();
        rows.push_back(row);
    }
    return rows;
}

}  // namespace ghostalign::pipeline
