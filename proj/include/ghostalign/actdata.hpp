// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ghostalign/matrix.hpp"

namespace ghostalign::actdata {

// ACTB layout, all integers little-endian:
//
//   offset  size  field
//   0       4     magic "ACTB"
//   4       4     version (u32, = 1)
//   8       4     dtype   (u32, 1 = f32, 2 = f64)
//   12      8     rows    (u64)
//   20      8     cols    (u64)
//   28      ...   row-major payload, rows*cols values of the dtype width
//
// One matrix per file. Values are always promoted to f64 on read.

inline constexpr std::size_t kHeaderSize = 28;
inline constexpr std::uint32_t kVersion = 1;

enum class DType : std::uint32_t { f32 = 1, f64 = 2 };

std::size_t dtype_width(DType d);

struct ActbHeader {
    std::uint32_t version = kVersion;
    DType dtype = DType::f64;
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
};

/// Serializes to the exact on-disk byte sequence.
std::vector<std::uint8_t> encode_actb(const Matrix& m, DType dtype);
/// Parses bytes; FormatError names the offending header field, LengthError
/// reports a header or payload of the wrong size.
Matrix decode_actb(std::span<const std::uint8_t> bytes, ActbHeader* header_out = nullptr);

void write_actb(const std::filesystem::path& path, const Matrix& m, DType dtype);
Matrix read_actb(const std::filesystem::path& path, ActbHeader* header_out = nullptr);

enum class DumpSource { simulator, exporter };

struct DumpMetadata {
    std::string model_id;
    std::int64_t pre_layer = 0;
    std::int64_t post_layer = 1;
    std::int64_t seq_len = 1;
    std::int64_t num_sequences = 1;
    std::int64_t token_count = 1;
    std::int64_t seed = 0;
    DumpSource source = DumpSource::simulator;

    /// Throws ConsistencyError if token_count != seq_len * num_sequences or
    /// post_layer <= pre_layer.
    void validate() const;
};

nlohmann::json to_json(const DumpMetadata& meta);
/// Requires exactly the DumpMetadata keys; unknown or missing keys are a
/// FormatError.
DumpMetadata metadata_from_json(const nlohmann::json& j);

struct CalibrationPair {
    Matrix pre;
    Matrix post;
    DumpMetadata meta;
};

inline constexpr std::string_view kPreFile = "pre.actb";
inline constexpr std::string_view kPostFile = "post.actb";
inline constexpr std::string_view kMetaFile = "meta.json";

/// Writes pre.actb, post.actb and meta.json into `dir` (created if needed).
void write_calibration_pair(const std::filesystem::path& dir, const Matrix& pre, const Matrix& post,
                            const DumpMetadata& meta, DType dtype);

/// Loads a dump directory and checks that both matrices share a shape whose
/// row count equals meta.token_count.
CalibrationPair load_calibration_pair(const std::filesystem::path& dir);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace ghostalign::actdata
