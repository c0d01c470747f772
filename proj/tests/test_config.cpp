// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "ghostalign/config.hpp"
#include "ghostalign/error.hpp"

using namespace ghostalign;
using nlohmann::json;

namespace {

template <class E = ConfigError>
std::string error_key(const json& j) {
    try {
        config_from_json(j);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<none>";
}

}  // namespace

TEST(Config, EmptyObjectGivesDefaults) {
    const RunConfig c = config_from_json(json::object());
    EXPECT_EQ(c.model.num_layers, 12u);
    EXPECT_EQ(c.model.hidden_dim, 64u);
    EXPECT_EQ(c.model.seed, 7u);
    EXPECT_EQ(c.pruning.n, 3u);
    EXPECT_EQ(c.pruning.criterion, pruning::Criterion::streamline_cosine);
    EXPECT_EQ(c.fit.methods.size(), 4u);
    EXPECT_EQ(c.fit.solver, recovery::Solver::ridge_normal);
    EXPECT_EQ(c.fit.eps, 1e-6);
    EXPECT_EQ(c.calibration.num_sequences, 32u);
    EXPECT_EQ(c.calibration.seq_len, 256u);
    EXPECT_EQ(c.eval.heldout_tokens, 2048u);
}

TEST(Config, RoundTrip) {
    const json in = {{"model", {{"num_layers", 8}, {"hidden_dim", 32}, {"seed", 3}}},
                     {"pruning", {{"criterion", "block_influence"}, {"n", 2}}},
                     {"fit", {{"method", "ghost"}, {"solver", "svd"}, {"eps", 1e-8}}},
                     {"calibration", {{"num_sequences", 4}, {"seq_len", 64}, {"seed", 5}}},
                     {"eval", {{"heldout_tokens", 512}, {"heldout_seed", 11}}}};
    const RunConfig c = config_from_json(in);
    EXPECT_EQ(c.fit.methods, std::vector<recovery::Method>{recovery::Method::ghost});
    EXPECT_EQ(c.fit.solver, recovery::Solver::svd_pinv);
    EXPECT_EQ(c.pruning.criterion, pruning::Criterion::block_influence);
    const RunConfig back = config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(back.calibration.seq_len, 64u);
}

TEST(Config, MethodList) {
    const RunConfig c = config_from_json({{"fit", {{"method", json::array({"identity", "ghost"})}}}});
    EXPECT_EQ(c.fit.methods.size(), 2u);
}

TEST(Config, RangeErrorsNameTheKey) {
    EXPECT_EQ(error_key({{"fit", {{"eps", -1.0}}}}), "fit.eps");
    EXPECT_EQ(error_key({{"pruning", {{"n", 12}}}}), "pruning.n");
    EXPECT_EQ(error_key({{"pruning", {{"n", 0}}}}), "pruning.n");
    EXPECT_EQ(error_key({{"calibration", {{"seq_len", 0}}}}), "calibration.seq_len");
    EXPECT_EQ(error_key({{"fit", {{"method", "lora"}}}}), "fit.method");
    EXPECT_EQ(error_key({{"model", {{"hidden_dim", -4}}}}), "model.hidden_dim");
    EXPECT_EQ(error_key({{"model", {{"num_layers", 2.5}}}}), "model.num_layers");
}

TEST(Config, UnknownKeysRejected) {
    EXPECT_EQ(error_key({{"modle", json::object()}}), "modle");
    EXPECT_EQ(error_key({{"fit", {{"epsilon", 1e-6}}}}), "fit.epsilon");
    EXPECT_EQ(error_key({{"model", {{"depth", 3}}}}), "model.depth");
}

TEST(Config, WrongTypesRejected) {
    EXPECT_THROW(config_from_json({{"pruning", {{"n", "three"}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json::array()), ConfigError);
}

TEST(Config, RotateNeedsPowerOfTwoWidth) {
    const json j = {{"model", {{"hidden_dim", 63}}}, {"fit", {{"method", "rotate"}}}};
    try {
        config_from_json(j);
        FAIL();
    } catch (const UnsupportedDimensionError& e) {
        EXPECT_EQ(e.category(), ErrorCategory::data);
    }
    EXPECT_NO_THROW(config_from_json({{"model", {{"hidden_dim", 63}}}, {"fit", {{"method", "ghost"}}}}));
}

TEST(Config, ParseFile) {
    const auto path = std::filesystem::temp_directory_path() / "ghostalign_config_test.json";
    {
        std::ofstream out(path);
        out << R"({"model": {"seed": 42}})";
    }
    EXPECT_EQ(parse_config(path).model.seed, 42u);
    {
        std::ofstream out(path);
        out << "{not json";
    }
    EXPECT_ANY_THROW(parse_config(path));
    std::filesystem::remove(path);
    EXPECT_ANY_THROW(parse_config(path));
}
