// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ghostalign/config.hpp"

#include <cmath>
#include <functional>
#include <map>

#include "ghostalign/actdata.hpp"
#include "ghostalign/error.hpp"
#include "ghostalign/linalg.hpp"

namespace ghostalign {

namespace {

using Json = nlohmann::json;
using Handler = std::function<void(const Json&, const std::string&)>;

void walk(const Json& j, const std::string& section, const std::map<std::string, Handler>& handlers) {
    if (!j.is_object()) throw ConfigError(section, "expected an object");
    for (const auto& [key, value] : j.items()) {
        const std::string path = section + "." + key;
        const auto it = handlers.find(key);
        if (it == handlers.end()) throw ConfigError(path, "unknown key");
        try {
            it->second(value, path);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(path, e.what());
        }
    }
}

std::size_t count(const Json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    if (v.get<std::int64_t>() < 0) throw ConfigError(path, "must be >= 0");
    return v.get<std::size_t>();
}

double real(const Json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
}

std::string text(const Json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
}

}  // namespace

RunConfig config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
    RunConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "model") {
            c.model = sim::model_config_from_json(value);
        } else if (key == "pruning") {
            walk(value, "pruning",
                 {{"criterion", [&](const Json& v, const std::string& p) { c.pruning.criterion = pruning::parse_criterion(text(v, p)); }},
                  {"n", [&](const Json& v, const std::string& p) { c.pruning.n = count(v, p); }},
                  {"cosine", [&](const Json& v, const std::string& p) { c.pruning.cosine = pruning::parse_cosine_mode(text(v, p)); }},
                  {"removal_metric",
                   [&](const Json& v, const std::string& p) { c.pruning.removal_metric = pruning::parse_removal_metric(text(v, p)); }}});
        } else if (key == "fit") {
            walk(value, "fit",
                 {{"method",
                   [&](const Json& v, const std::string& p) {
                       c.fit.methods.clear();
                       if (v.is_string()) {
                           c.fit.methods.push_back(recovery::parse_method(v.get<std::string>()));
                       } else if (v.is_array() && !v.empty()) {
                           for (const auto& m : v) c.fit.methods.push_back(recovery::parse_method(text(m, p)));
                       } else {
                           throw ConfigError(p, "expected a method name or a non-empty list of names");
                       }
                   }},
                  {"solver", [&](const Json& v, const std::string& p) { c.fit.solver = recovery::parse_solver(text(v, p)); }},
                  {"eps", [&](const Json& v, const std::string& p) { c.fit.eps = real(v, p); }},
                  {"svd_eps", [&](const Json& v, const std::string& p) { c.fit.svd_eps = real(v, p); }}});
        } else if (key == "calibration") {
            walk(value, "calibration",
                 {{"num_sequences", [&](const Json& v, const std::string& p) { c.calibration.num_sequences = count(v, p); }},
                  {"seq_len", [&](const Json& v, const std::string& p) { c.calibration.seq_len = count(v, p); }},
                  {"seed", [&](const Json& v, const std::string& p) { c.calibration.seed = count(v, p); }}});
        } else if (key == "eval") {
            walk(value, "eval",
                 {{"heldout_tokens", [&](const Json& v, const std::string& p) { c.eval.heldout_tokens = count(v, p); }},
                  {"heldout_seed", [&](const Json& v, const std::string& p) { c.eval.heldout_seed = count(v, p); }}});
        } else if (key == "paths") {
            walk(value, "paths", {{"workdir", [&](const Json& v, const std::string& p) { c.paths.workdir = text(v, p); }}});
        } else {
            throw ConfigError(key, "unknown key");
        }
    }
    validate(c);
    return c;
}

void validate(const RunConfig& c) {
    if (c.model.num_layers < 2) throw ConfigError("model.num_layers", "must be >= 2");
    if (c.model.hidden_dim < 2) throw ConfigError("model.hidden_dim", "must be >= 2");
    if (c.pruning.n < 1 || c.pruning.n >= c.model.num_layers)
        throw ConfigError("pruning.n", "must lie in [1, model.num_layers - 1]");
    if (!(c.fit.eps > 0.0) || !std::isfinite(c.fit.eps)) throw ConfigError("fit.eps", "must be a positive number");
    if (!(c.fit.svd_eps > 0.0) || !std::isfinite(c.fit.svd_eps))
        throw ConfigError("fit.svd_eps", "must be a positive number");
    if (c.calibration.num_sequences < 1) throw ConfigError("calibration.num_sequences", "must be >= 1");
    if (c.calibration.seq_len < 1) throw ConfigError("calibration.seq_len", "must be >= 1");
    if (c.eval.heldout_tokens < 1) throw ConfigError("eval.heldout_tokens", "must be >= 1");
    for (recovery::Method m : c.fit.methods) {
        if (m == recovery::Method::rotate && !linalg::is_power_of_two(c.model.hidden_dim)) {
            throw UnsupportedDimensionError("method 'rotate' needs a power-of-two model.hidden_dim, got " +
                                            std::to_string(c.model.hidden_dim));
        }
    }
}

RunConfig parse_config(const std::filesystem::path& path) {
    Json j;
    try {
        j = actdata::read_json_file(path);
    } catch (const Error& e) {
        throw ConfigError(path.string(), e.what());
    }
    return config_from_json(j);
}

Json to_json(const RunConfig& c) {
    Json methods = Json::array();
    for (recovery::Method m : c.fit.methods) methods.push_back(recovery::to_string(m));
    return {
        {"model", sim::to_json(c.model)},
        {"pruning",
         {{"criterion", pruning::to_string(c.pruning.criterion)},
          {"n", c.pruning.n},
          {"cosine", pruning::to_string(c.pruning.cosine)},
          {"removal_metric", pruning::to_string(c.pruning.removal_metric)}}},
        {"fit",
         {{"method", methods}, {"solver", recovery::to_string(c.fit.solver)}, {"eps", c.fit.eps}, {"svd_eps", c.fit.svd_eps}}},
        {"calibration",
         {{"num_sequences", c.calibration.num_sequences}, {"seq_len", c.calibration.seq_len}, {"seed", c.calibration.seed}}},
        {"eval", {{"heldout_tokens", c.eval.heldout_tokens}, {"heldout_seed", c.eval.heldout_seed}}},
        {"paths", {{"workdir", c.paths.workdir}}},
    };
}

}  // namespace ghostalign
