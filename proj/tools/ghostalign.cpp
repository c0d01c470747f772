// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

// ghostalign: pruning-boundary recovery pipeline.
//
//   ghostalign run --workdir out/                 full pipeline, all methods
//   ghostalign simulate --spec 4:3                boundary dumps from the toy model
//   ghostalign select --criterion block_influence --n 2
//   ghostalign fit --method ghost --solver svd --dump out/
//   ghostalign eval --spec 4:3 --operator out/operator_ghost.actb
//   ghostalign sweep --sizes 16,32,64,128 --seeds 0..4
//   ghostalign decompose --operator out/operator_ghost.actb
//   ghostalign report --workdir out/
//
// Exit codes: 0 ok, 2 config error, 3 data/format error, 4 numerical error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ghostalign/actdata.hpp"
#include "ghostalign/analysis.hpp"
#include "ghostalign/config.hpp"
#include "ghostalign/error.hpp"
#include "ghostalign/pipeline.hpp"
#include "ghostalign/pruning.hpp"
#include "ghostalign/recovery.hpp"
#include "ghostalign/simulator.hpp"

namespace fs = std::filesystem;
using namespace ghostalign;
using Json = nlohmann::json;

namespace {

struct GlobalOptions {
    std::string config_path;
    std::string workdir;
    unsigned threads = 1;
    bool force = false;
};

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config:
            return 2;
        case ErrorCategory::data:
            return 3;
        case ErrorCategory::numerical:
            return 4;
    }
    return 1;
}

RunConfig load_config(const GlobalOptions& g) {
    return g.config_path.empty() ? RunConfig{} : parse_config(g.config_path);
}

void guard_overwrite(const fs::path& path, bool force) {
    if (fs::exists(path) && !force) throw ConfigError("--force", path.string() + " exists; pass --force to overwrite");
}

fs::path ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir.string(), ec.message());
    return dir;
}

sim::ModelConfig model_config(const std::string& path, const RunConfig& config) {
    if (path.empty()) return config.model;
    return sim::model_config_from_json(actdata::read_json_file(path));
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoull(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ConfigError("--sizes", "cannot parse '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("--sizes", "empty list");
    return out;
}

// "A..B" inclusive or a comma list.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    try {
        if (const auto dots = text.find(".."); dots != std::string::npos) {
            const auto lo = std::stoull(text.substr(0, dots));
            const auto hi = std::stoull(text.substr(dots + 2));
            if (hi < lo) throw ConfigError("--seeds", "empty range " + text);
            for (auto s = lo; s <= hi; ++s) out.push_back(s);
            return out;
        }
        for (std::size_t v : parse_sizes(text)) out.push_back(v);
    } catch (const std::logic_error&) {
        throw ConfigError("--seeds", "cannot parse '" + text + "'");
    }
    return out;
}

// Explicit --spec, else the selection recorded in <workdir>/scores.json, else
// the configured criterion.
std::vector<sim::BoundarySpec> resolve_regions(const std::string& spec_text, const fs::path* workdir,
                                               const sim::ToyModel& model, const RunConfig& config) {
    if (!spec_text.empty()) return {sim::parse_boundary_spec(spec_text)};
    if (workdir != nullptr && fs::exists(*workdir / "scores.json"))
        return pipeline::regions_from_scores_json(actdata::read_json_file(*workdir / "scores.json"));
    return pipeline::regions_of(pipeline::select_layers(model, pipeline::calibration_inputs(model, config), config));
}

void print_json(const Json& j) { std::cout << j.dump(2) << "\n"; }

int cmd_run(const GlobalOptions& g) {
    const RunConfig config = load_config(g);
    const fs::path workdir = pipeline::resolve_workdir(g.workdir, config);
    const auto result = pipeline::run_pipeline(config, workdir, g.force);
    std::cout << "pruned regions:";
    for (const auto& r : result.regions) std::cout << " " << sim::to_string(r);
    std::cout << "\n" << pipeline::summary_text(result.summary);
    return 0;
}

int cmd_simulate(const GlobalOptions& g, const std::string& spec_text, const std::string& dtype_text) {
    const RunConfig config = load_config(g);
    const fs::path workdir = ensure_dir(pipeline::resolve_workdir(g.workdir, config));
    const auto dtype = dtype_text == "f32" ? actdata::DType::f32 : actdata::DType::f64;
    const sim::ToyModel model = pipeline::stage("simulate", [&] { return sim::build_toy_model(config.model); });
    const auto regions = pipeline::stage("select", [&] { return resolve_regions(spec_text, &workdir, model, config); });
    const Matrix calib = pipeline::calibration_inputs(model, config);

    pipeline::stage("simulate", [&] {
        for (std::size_t k = 0; k < regions.size(); ++k)
            guard_overwrite(pipeline::region_dir(workdir, k, regions.size()) / actdata::kPreFile, g.force);
        actdata::write_json_file(workdir / "config.effective.json", to_json(config));
        actdata::write_json_file(workdir / "model.json", sim::to_json(config.model));
        for (std::size_t k = 0; k < regions.size(); ++k) {
            const auto pair = sim::forward_capture(model, calib, regions[k]);
            actdata::DumpMetadata meta;
            meta.model_id = model.model_id();
            meta.pre_layer = static_cast<std::int64_t>(regions[k].start());
            meta.post_layer = static_cast<std::int64_t>(regions[k].post());
            meta.seq_len = static_cast<std::int64_t>(config.calibration.seq_len);
            meta.num_sequences = static_cast<std::int64_t>(config.calibration.num_sequences);
            meta.token_count = meta.seq_len * meta.num_sequences;
            meta.seed = static_cast<std::int64_t>(config.calibration.seed);
            const fs::path dir = pipeline::region_dir(workdir, k, regions.size());
            actdata::write_calibration_pair(dir, pair.pre, pair.post, meta, dtype);
            std::cout << "wrote " << dir.string() << " (" << sim::to_string(regions[k]) << ", " << meta.token_count
                      << " tokens)\n";
        }
    });
    return 0;
}

int cmd_select(const GlobalOptions& g, const std::string& criterion, std::optional<std::size_t> n,
               const std::string& model_path, const std::string& calib_path, const std::string& cosine) {
    RunConfig config = load_config(g);
    config.model = model_config(model_path, config);
    if (!criterion.empty()) config.pruning.criterion = pruning::parse_criterion(criterion);
    if (n) config.pruning.n = *n;
    if (!cosine.empty()) config.pruning.cosine = pruning::parse_cosine_mode(cosine);
    validate(config);

    const sim::ToyModel model = sim::build_toy_model(config.model);
    const Matrix calib = calib_path.empty() ? pipeline::calibration_inputs(model, config) : actdata::read_actb(calib_path);
    const auto scores = pipeline::stage("select", [&] { return pipeline::select_layers(model, calib, config); });
    const Json j = pruning::to_json(scores);
    if (!g.workdir.empty() || !config.paths.workdir.empty() || std::getenv("GHOSTALIGN_WORKDIR") != nullptr) {
        const fs::path workdir = ensure_dir(pipeline::resolve_workdir(g.workdir, config));
        guard_overwrite(workdir / "scores.json", g.force);
        actdata::write_json_file(workdir / "scores.json", j);
    }
    print_json(j);
    return 0;
}

int cmd_fit(const GlobalOptions& g, const std::string& method_text, const std::string& solver_text,
            std::optional<double> eps_flag, const std::string& dump_flag, const std::string& out_flag) {
    RunConfig config = load_config(g);
    const auto method = recovery::parse_method(method_text);
    if (!solver_text.empty()) config.fit.solver = recovery::parse_solver(solver_text);
    double eps = config.fit.eps_for(config.fit.solver);
    if (eps_flag) {
        if (!(*eps_flag > 0.0)) throw ConfigError("--eps", "must be positive");
        eps = *eps_flag;
    }
    const fs::path dump = dump_flag.empty() ? pipeline::resolve_workdir(g.workdir, config) : fs::path(dump_flag);
    const fs::path out = out_flag.empty() ? dump / ("operator_" + method_text + ".actb") : fs::path(out_flag);
    guard_overwrite(out, g.force);

    const auto loaded = pipeline::stage("load", [&] { return actdata::load_calibration_pair(dump); });
    const sim::ActivationPair pair{loaded.pre, loaded.post};
    const auto op = pipeline::stage("fit", [&] { return recovery::fit_operator(pair, method, config.fit.solver, eps); });
    pipeline::write_operator(out, method, op, pair.pre.cols());

    Json report = actdata::read_json_file(fs::path(out).replace_extension(".json"));
    report["operator_file"] = out.string();
    report["identity_residual"] = frobenius_norm(pair.post - pair.pre);
    report["alignment_residual"] = recovery::alignment_residual(pair, op);
    print_json(report);
    return 0;
}

int cmd_eval(const GlobalOptions& g, const std::string& model_path, const std::string& spec_text,
             const std::string& operator_path, std::optional<std::uint64_t> heldout_seed,
             const std::string& split_text, const std::string& dump_flag, const std::string& out_flag) {
    const RunConfig config = load_config(g);
    const sim::ToyModel model = sim::build_toy_model(model_config(model_path, config));
    const std::optional<fs::path> workdir =
        g.workdir.empty() && config.paths.workdir.empty() && std::getenv("GHOSTALIGN_WORKDIR") == nullptr
            ? std::nullopt
            : std::optional<fs::path>(pipeline::resolve_workdir(g.workdir, config));
    const auto regions = resolve_regions(spec_text, workdir ? &*workdir : nullptr, model, config);
    if (regions.size() != 1) throw ConfigError("--spec", "eval handles a single pruned block; pass --spec");
    const sim::BoundarySpec spec = regions.front();

    recovery::Operator op = recovery::IdentityOperator{};
    std::string method = "identity";
    if (!operator_path.empty()) {
        auto loaded = pipeline::read_operator(operator_path);
        if (loaded.hidden_dim != model.hidden_dim())
            throw ShapeError("operator is " + std::to_string(loaded.hidden_dim) + " wide, model has " +
                             std::to_string(model.hidden_dim()) + " channels");
        op = std::move(loaded.op);
        method = recovery::to_string(loaded.method);
    }

    const auto split = split_text == "calibration" ? analysis::Split::calibration : analysis::Split::heldout;
    sim::ActivationPair calib;
    if (split == analysis::Split::calibration) {
        if (!dump_flag.empty() || workdir) {
            const auto loaded = actdata::load_calibration_pair(dump_flag.empty() ? *workdir : fs::path(dump_flag));
            calib = {loaded.pre, loaded.post};
        } else {
            calib = sim::forward_capture(model, pipeline::calibration_inputs(model, config), spec);
        }
    }
    const Matrix heldout = pipeline::heldout_inputs(model, config, heldout_seed);
    const auto report = pipeline::stage("eval", [&] {
        return analysis::evaluate_method(model, spec, op, calib, heldout, split, method);
    });
    const Json j = analysis::to_json(report);
    if (!out_flag.empty()) {
        guard_overwrite(out_flag, g.force);
        actdata::write_json_file(out_flag, j);
    }
    print_json(j);
    return 0;
}

int cmd_sweep(const GlobalOptions& g, const std::string& model_path, const std::string& spec_text,
              const std::string& sizes, const std::string& seeds, std::optional<std::size_t> seq_len,
              const std::string& solver_text, const std::string& out_flag) {
    RunConfig config = load_config(g);
    const sim::ToyModel model = sim::build_toy_model(model_config(model_path, config));
    analysis::SweepOptions options;
    options.sizes = parse_sizes(sizes);
    options.seeds = parse_seeds(seeds);
    options.seq_len = seq_len.value_or(config.calibration.seq_len);
    options.heldout_tokens = config.eval.heldout_tokens;
    options.heldout_seed = config.eval.heldout_seed;
    options.solver = solver_text.empty() ? config.fit.solver : recovery::parse_solver(solver_text);
    options.eps = config.fit.eps_for(options.solver);
    const auto regions = resolve_regions(spec_text, nullptr, model, config);
    if (regions.size() != 1) throw ConfigError("--spec", "sweep handles a single pruned block; pass --spec");

    const auto report = pipeline::stage("sweep", [&] { return analysis::calibration_sweep(model, regions.front(), options); });
    const std::string csv = analysis::sweep_csv(report);
    if (!out_flag.empty()) {
        guard_overwrite(out_flag, g.force);
        actdata::write_text_file(out_flag, csv);
    }
    std::cout << csv;
    return 0;
}

int cmd_decompose(const std::string& operator_path) {
    const auto loaded = pipeline::read_operator(operator_path);
    const auto d = recovery::decompose_symmetry(recovery::additive_part(loaded.op, loaded.hidden_dim));
    print_json({{"norm_total", d.norm_total},
                {"norm_sym", d.norm_sym},
                {"norm_asym", d.norm_asym},
                {"sym_ratio", d.sym_ratio()},
                {"asym_ratio", d.asym_ratio()}});
    return 0;
}

int cmd_report(const GlobalOptions& g) {
    const RunConfig config = load_config(g);
    const fs::path workdir = pipeline::resolve_workdir(g.workdir, config);
    const auto rows = pipeline::collect_summary(workdir);
    if (rows.empty()) throw ConfigError("paths.workdir", "no eval_<method>.json files in " + workdir.string());
    actdata::write_text_file(workdir / "summary.csv", pipeline::summary_csv(rows));
    actdata::write_text_file(workdir / "summary.txt", pipeline::summary_text(rows));

    // channel x method table for plotting.
    std::vector<std::vector<double>> columns;
    std::ostringstream csv;
    csv << "channel";
    for (const auto& r : rows) {
        csv << "," << r.method;
        columns.push_back(actdata::read_json_file(workdir / ("eval_" + r.method + ".json"))
                              .at("per_channel_mae")
                              .get<std::vector<double>>());
    }
    csv << "\n";
    for (std::size_t j = 0; j < columns.front().size(); ++j) {
        csv << j;
        for (const auto& col : columns) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", col.at(j));
            csv << "," << buf;
        }
        csv << "\n";
    }
    actdata::write_text_file(workdir / "per_channel_mae.csv", csv.str());
    std::cout << pipeline::summary_text(rows);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-form boundary operators for layer-pruned residual networks"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config_path, "JSON run configuration");
    app.add_option("--workdir", g.workdir, "Artifact directory (fallback: GHOSTALIGN_WORKDIR)");
    app.add_option("--threads", g.threads, "Worker threads; 1 is bit-reproducible")->check(CLI::PositiveNumber);
    app.add_flag("--force", g.force, "Overwrite existing artifacts");

    auto* run = app.add_subcommand("run", "Full pipeline: simulate, select, fit, eval, report");

    auto* simulate = app.add_subcommand("simulate", "Write pre/post boundary dumps from the toy model");
    std::string sim_spec;
    std::string sim_dtype = "f64";
    simulate->add_option("--spec", sim_spec, "Pruned block START:COUNT");
    simulate->add_option("--dtype", sim_dtype, "On-disk precision")->check(CLI::IsMember({"f32", "f64"}));

    auto* select = app.add_subcommand("select", "Score layers and choose what to prune");
    std::string sel_criterion;
    std::optional<std::size_t> sel_n;
    std::string sel_model;
    std::string sel_calib;
    std::string sel_cosine;
    select->add_option("--criterion", sel_criterion)
        ->check(CLI::IsMember({"streamline_cosine", "block_influence", "removal_loss"}));
    select->add_option("--n", sel_n, "Layers to prune");
    select->add_option("--model-config", sel_model, "model.json");
    select->add_option("--calib", sel_calib, "ACTB matrix of calibration tokens");
    select->add_option("--cosine", sel_cosine)->check(CLI::IsMember({"per_token", "flattened"}));

    auto* fit = app.add_subcommand("fit", "Fit a boundary operator on a dump directory");
    std::string fit_method = "ghost";
    std::string fit_solver;
    std::optional<double> fit_eps;
    std::string fit_dump;
    std::string fit_out;
    fit->add_option("--method", fit_method)->check(CLI::IsMember({"ghost", "diag", "rotate", "identity"}));
    fit->add_option("--solver", fit_solver)->check(CLI::IsMember({"svd", "ridge"}));
    fit->add_option("--eps", fit_eps, "Ridge coefficient (ridge) or relative cutoff (svd)");
    fit->add_option("--dump", fit_dump, "Directory with pre.actb, post.actb, meta.json");
    fit->add_option("--out", fit_out, "Operator ACTB path");

    auto* eval = app.add_subcommand("eval", "Evaluate an operator on held-out tokens");
    std::string ev_model;
    std::string ev_spec;
    std::string ev_operator;
    std::optional<std::uint64_t> ev_seed;
    std::string ev_split = "heldout";
    std::string ev_dump;
    std::string ev_out;
    eval->add_option("--model-config", ev_model);
    eval->add_option("--spec", ev_spec, "Pruned block START:COUNT");
    eval->add_option("--operator", ev_operator, "Operator ACTB path; omit for plain pruning");
    eval->add_option("--heldout-seed", ev_seed);
    eval->add_option("--split", ev_split)->check(CLI::IsMember({"heldout", "calibration"}));
    eval->add_option("--dump", ev_dump, "Calibration dump for --split calibration");
    eval->add_option("--out", ev_out, "Also write the report here");

    auto* sweep = app.add_subcommand("sweep", "Calibration-size sweep for the ghost operator");
    std::string sw_model;
    std::string sw_spec;
    std::string sw_sizes = "16,32,64,128";
    std::string sw_seeds = "0..4";
    std::optional<std::size_t> sw_seq_len;
    std::string sw_solver;
    std::string sw_out;
    sweep->add_option("--model-config", sw_model);
    sweep->add_option("--spec", sw_spec);
    sweep->add_option("--sizes", sw_sizes, "Comma-separated sequence counts");
    sweep->add_option("--seeds", sw_seeds, "Range A..B or comma list");
    sweep->add_option("--seq-len", sw_seq_len);
    sweep->add_option("--solver", sw_solver)->check(CLI::IsMember({"svd", "ridge"}));
    sweep->add_option("--out", sw_out, "CSV path");

    auto* decompose = app.add_subcommand("decompose", "Symmetric / anti-symmetric split of an operator");
    std::string dec_operator;
    decompose->add_option("--operator", dec_operator)->required();

    auto* report = app.add_subcommand("report", "Rebuild summary and per-channel CSVs from eval files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    set_num_threads(g.threads);
    try {
        if (run->parsed()) return cmd_run(g);
        if (simulate->parsed()) return cmd_simulate(g, sim_spec, sim_dtype);
        if (select->parsed()) return cmd_select(g, sel_criterion, sel_n, sel_model, sel_calib, sel_cosine);
        if (fit->parsed()) return cmd_fit(g, fit_method, fit_solver, fit_eps, fit_dump, fit_out);
        if (eval->parsed()) return cmd_eval(g, ev_model, ev_spec, ev_operator, ev_seed, ev_split, ev_dump, ev_out);
        if (sweep->parsed()) return cmd_sweep(g, sw_model, sw_spec, sw_sizes, sw_seeds, sw_seq_len, sw_solver, sw_out);
        if (decompose->parsed()) return cmd_decompose(dec_operator);
        if (report->parsed()) return cmd_report(g);
    } catch (const Error& e) {
        std::cerr << "ghostalign: " << e.what() << "\n";
        return exit_code(e.category());
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "ghostalign: format error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "ghostalign: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
