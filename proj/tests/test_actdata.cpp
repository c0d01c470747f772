// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "ghostalign/actdata.hpp"
#include "ghostalign/error.hpp"

using namespace ghostalign;
using namespace ghostalign::actdata;

namespace fs = std::filesystem;

namespace {

const fs::path kGolden = fs::path(GHOSTALIGN_TEST_DATA_DIR) / "golden";

std::vector<std::uint8_t> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() /
                ("ghostalign_actdata_" + std::to_string(std::random_device{}()) + "_" +
                 ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

DumpMetadata meta_for(std::int64_t seq_len, std::int64_t num_sequences) {
    DumpMetadata m;
    m.model_id = "toy-L12-C64-s7";
    m.pre_layer = 4;
    m.post_layer = 7;
    m.seq_len = seq_len;
    m.num_sequences = num_sequences;
    m.token_count = seq_len * num_sequences;
    m.seed = 1;
    return m;
}

template <class E>
void expect_field(const fs::path& file, const std::string& field) {
    try {
        read_actb(file);
        FAIL() << "no exception for " << file;
    } catch (const E& e) {
        if constexpr (std::is_same_v<E, FormatError>) EXPECT_EQ(e.field(), field);
        EXPECT_EQ(e.category(), ErrorCategory::data);
    }
}

}  // namespace

TEST(ActbGolden, SingleValue) {
    ActbHeader h;
    const Matrix m = read_actb(kGolden / "f64_1x1.actb", &h);
    EXPECT_EQ(h.dtype, DType::f64);
    EXPECT_EQ(h.rows, 1u);
    EXPECT_EQ(h.cols, 1u);
    EXPECT_EQ(m, Matrix(1, 1, {2.5}));
}

TEST(ActbGolden, RowMajorF64) {
    const Matrix m = read_actb(kGolden / "f64_2x3.actb");
    EXPECT_EQ(m, Matrix(2, 3, {1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(m(0, 2), 3.0);
    EXPECT_EQ(m(1, 0), 4.0);
}

TEST(ActbGolden, F32) {
    ActbHeader h;
    const Matrix m = read_actb(kGolden / "f32_2x2.actb", &h);
    EXPECT_EQ(h.dtype, DType::f32);
    EXPECT_EQ(m, Matrix(2, 2, {1.5, -2.0, 0.25, 1024.0}));
}

TEST(ActbGolden, EncodingIsByteExact) {
    EXPECT_EQ(encode_actb(Matrix(1, 1, {2.5}), DType::f64), slurp(kGolden / "f64_1x1.actb"));
    EXPECT_EQ(encode_actb(Matrix(2, 3, {1, 2, 3, 4, 5, 6}), DType::f64), slurp(kGolden / "f64_2x3.actb"));
    EXPECT_EQ(encode_actb(Matrix(2, 2, {1.5, -2.0, 0.25, 1024.0}), DType::f32), slurp(kGolden / "f32_2x2.actb"));
    EXPECT_EQ(slurp(kGolden / "f64_1x1.actb").size(), kHeaderSize + 8);
}

TEST(ActbGolden, MalformedFilesRaiseTypedErrors) {
    expect_field<FormatError>(kGolden / "bad_magic.actb", "magic");
    expect_field<FormatError>(kGolden / "bad_version.actb", "version");
    expect_field<FormatError>(kGolden / "bad_dtype.actb", "dtype");
    expect_field<LengthError>(kGolden / "truncated_payload.actb", "");
    expect_field<LengthError>(kGolden / "short_header.actb", "");
}

TEST(Actb, TrailingBytesRejected) {
    auto bytes = encode_actb(Matrix(1, 2, {1.0, 2.0}), DType::f64);
    bytes.push_back(0);
    EXPECT_THROW(decode_actb(bytes), LengthError);
}

TEST(Actb, NonFinitePayloadRejected) {
    auto bytes = encode_actb(Matrix(1, 1, {1.0}), DType::f64);
    const auto nan = std::bit_cast<std::uint64_t>(std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < 8; ++i) bytes[kHeaderSize + i] = static_cast<std::uint8_t>(nan >> (8 * i));
    try {
        decode_actb(bytes);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.field(), "payload");
    }
}

TEST(Actb, MissingFileIsIoError) { EXPECT_THROW(read_actb(kGolden / "does_not_exist.actb"), IoError); }

TEST(Actb, F64RoundTripIsExact) {
    std::mt19937 gen(3);
    std::normal_distribution<double> normal(0.0, 10.0);
    std::vector<double> v(7 * 5);
    for (double& x : v) x = normal(gen);
    const Matrix m(7, 5, v);
    EXPECT_EQ(decode_actb(encode_actb(m, DType::f64)), m);
}

TEST(Actb, F32RoundTripWithinHalfUlp) {
    std::mt19937 gen(4);
    std::normal_distribution<double> normal;
    std::vector<double> v(64 * 16);
    for (double& x : v) x = normal(gen);
    const Matrix m(64, 16, v);
    const Matrix back = decode_actb(encode_actb(m, DType::f32));
    for (std::size_t i = 0; i < v.size(); ++i)
        EXPECT_LE(std::abs(back.values()[i] - v[i]), std::ldexp(std::abs(v[i]), -24)) << i;
}

TEST(Actb, EmptyMatrixRoundTrips) {
    const auto bytes = encode_actb(Matrix(0, 4), DType::f64);
    EXPECT_EQ(bytes.size(), kHeaderSize);
    const Matrix m = decode_actb(bytes);
    EXPECT_EQ(m.rows(), 0u);
    EXPECT_EQ(m.cols(), 4u);
}

TEST(Metadata, JsonRoundTrip) {
    const DumpMetadata m = meta_for(256, 32);
    const auto j = to_json(m);
    EXPECT_EQ(j.size(), 8u);
    const DumpMetadata back = metadata_from_json(j);
    EXPECT_EQ(back.model_id, m.model_id);
    EXPECT_EQ(back.pre_layer, 4);
    EXPECT_EQ(back.post_layer, 7);
    EXPECT_EQ(back.token_count, 8192);
    EXPECT_EQ(back.source, DumpSource::simulator);
}

TEST(Metadata, RejectsUnknownAndMissingKeys) {
    auto j = to_json(meta_for(4, 2));
    j["extra"] = 1;
    try {
        metadata_from_json(j);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.field(), "extra");
    }
    j = to_json(meta_for(4, 2));
    j.erase("seed");
    try {
        metadata_from_json(j);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.field(), "seed");
    }
}

TEST(Metadata, RejectsInconsistentCounts) {
    auto j = to_json(meta_for(4, 2));
    j["token_count"] = 9;
    EXPECT_THROW(metadata_from_json(j), ConsistencyError);
    j = to_json(meta_for(4, 2));
    j["post_layer"] = 4;
    EXPECT_THROW(metadata_from_json(j), ConsistencyError);
    j = to_json(meta_for(4, 2));
    j["source"] = "camera";
    EXPECT_THROW(metadata_from_json(j), FormatError);
}

TEST(CalibrationPairIo, RoundTripBothDtypes) {
    TempDir dir;
    std::vector<double> pre_v(8 * 3);
    std::vector<double> post_v(8 * 3);
    for (std::size_t i = 0; i < pre_v.size(); ++i) {
        pre_v[i] = 0.5 * static_cast<double>(i);
        post_v[i] = -0.25 * static_cast<double>(i);
    }
    const Matrix pre(8, 3, pre_v);
    const Matrix post(8, 3, post_v);

    write_calibration_pair(dir.path() / "f64", pre, post, meta_for(4, 2), DType::f64);
    write_calibration_pair(dir.path() / "f32", pre, post, meta_for(4, 2), DType::f32);
    const auto a = load_calibration_pair(dir.path() / "f64");
    const auto b = load_calibration_pair(dir.path() / "f32");
    // These values are exact in single precision.
    EXPECT_EQ(a.pre, pre);
    EXPECT_EQ(a.post, post);
    EXPECT_EQ(b.pre, a.pre);
    EXPECT_EQ(b.post, a.post);
    EXPECT_EQ(a.meta.token_count, 8);
}

TEST(CalibrationPairIo, RowMismatchIsConsistencyError) {
    TempDir dir;
    write_calibration_pair(dir.path(), Matrix(100, 4), Matrix(100, 4), meta_for(100, 1), DType::f64);
    write_actb(dir.path() / kPostFile, Matrix(99, 4), DType::f64);
    EXPECT_THROW(load_calibration_pair(dir.path()), ConsistencyError);
}

TEST(CalibrationPairIo, TokenCountMismatchIsConsistencyError) {
    TempDir dir;
    write_calibration_pair(dir.path(), Matrix(6, 2), Matrix(6, 2), meta_for(3, 2), DType::f64);
    write_actb(dir.path() / kPreFile, Matrix(5, 2), DType::f64);
    write_actb(dir.path() / kPostFile, Matrix(5, 2), DType::f64);
    EXPECT_THROW(load_calibration_pair(dir.path()), ConsistencyError);
}

TEST(CalibrationPairIo, WriterValidatesShapes) {
    TempDir dir;
    EXPECT_THROW(write_calibration_pair(dir.path(), Matrix(6, 2), Matrix(6, 3), meta_for(3, 2), DType::f64),
                 ConsistencyError);
    EXPECT_THROW(write_calibration_pair(dir.path(), Matrix(5, 2), Matrix(5, 2), meta_for(3, 2), DType::f64),
                 ConsistencyError);
}
