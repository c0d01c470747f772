// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#include "ghostalign/actdata.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "ghostalign/error.hpp"

namespace ghostalign::actdata {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[offset + i]) << (8 * i);
    return value;
}

const char* source_name(DumpSource s) { return s == DumpSource::simulator ? "simulator" : "exporter"; }

}  // namespace

std::size_t dtype_width(DType d) {
    switch (d) {
        case DType::f32:
            return 4;
        case DType::f64:
            return 8;
    }
    throw FormatError("dtype", "unknown dtype code " + std::to_string(static_cast<std::uint32_t>(d)));
}

std::vector<std::uint8_t> encode_actb(const Matrix& m, DType dtype) {
    if (!m.all_finite()) throw NumericalError("refusing to write a matrix with non-finite entries");
    const std::size_t width = dtype_width(dtype);
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + m.size() * width);
    for (char ch : {'A', 'C', 'T', 'B'}) out.push_back(static_cast<std::uint8_t>(ch));
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dtype));
    put_le<std::uint64_t>(out, m.rows());
    put_le<std::uint64_t>(out, m.cols());
    for (double v : m.values()) {
        if (dtype == DType::f32) {
            put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        } else {
            put_le(out, std::bit_cast<std::uint64_t>(v));
        }
    }
    return out;
}

Matrix decode_actb(std::span<const std::uint8_t> bytes, ActbHeader* header_out) {
    if (bytes.size() < kHeaderSize) {
        throw LengthError("ACTB header needs " + std::to_string(kHeaderSize) + " bytes, got " +
                          std::to_string(bytes.size()));
    }
    if (bytes[0] != 'A' || bytes[1] != 'C' || bytes[2] != 'T' || bytes[3] != 'B') {
        throw FormatError("magic", "expected \"ACTB\"");
    }
    ActbHeader h;
    h.version = get_le<std::uint32_t>(bytes, 4);
    if (h.version != kVersion) throw FormatError("version", "unsupported version " + std::to_string(h.version));
    const auto dtype_code = get_le<std::uint32_t>(bytes, 8);
    if (dtype_code != 1 && dtype_code != 2) throw FormatError("dtype", "unknown dtype code " + std::to_string(dtype_code));
    h.dtype = static_cast<DType>(dtype_code);
    h.rows = get_le<std::uint64_t>(bytes, 12);
    h.cols = get_le<std::uint64_t>(bytes, 20);

    const std::size_t width = dtype_width(h.dtype);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / width;
    if (h.cols != 0 && h.rows > limit / h.cols) {
        throw LengthError("declared shape " + std::to_string(h.rows) + "x" + std::to_string(h.cols) + " overflows");
    }
    const std::uint64_t expected = h.rows * h.cols * width;
    const std::uint64_t actual = bytes.size() - kHeaderSize;
    if (actual != expected) {
        throw LengthError("declared shape " + std::to_string(h.rows) + "x" + std::to_string(h.cols) + " needs " +
                          std::to_string(expected) + " payload bytes, file has " + std::to_string(actual));
    }

    std::vector<double> values(h.rows * h.cols);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t off = kHeaderSize + i * width;
        values[i] = h.dtype == DType::f32 ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, off)))
                                          : std::bit_cast<double>(get_le<std::uint64_t>(bytes, off));
        if (!std::isfinite(values[i])) throw FormatError("payload", "entry " + std::to_string(i) + " is not finite");
    }
    if (header_out != nullptr) *header_out = h;
    return Matrix(h.rows, h.cols, std::move(values));
}

void write_actb(const std::filesystem::path& path, const Matrix& m, DType dtype) {
    const auto bytes = encode_actb(m, dtype);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path.string(), "write failed");
}

Matrix read_actb(const std::filesystem::path& path, ActbHeader* header_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_actb(bytes, header_out);
}

void DumpMetadata::validate() const {
    if (seq_len < 1 || num_sequences < 1) throw ConsistencyError("seq_len and num_sequences must be positive");
    if (token_count != seq_len * num_sequences) {
        throw ConsistencyError("token_count " + std::to_string(token_count) + " != seq_len " + std::to_string(seq_len) +
                               " x num_sequences " + std::to_string(num_sequences));
    }
    if (pre_layer < 0 || post_layer <= pre_layer) {
        throw ConsistencyError("need 0 <= pre_layer < post_layer, got " + std::to_string(pre_layer) + " and " +
                               std::to_string(post_layer));
    }
}

nlohmann::json to_json(const DumpMetadata& meta) {
    return {
        {"model_id", meta.model_id},         {"pre_layer", meta.pre_layer},
        {"post_layer", meta.post_layer},     {"seq_len", meta.seq_len},
        {"num_sequences", meta.num_sequences}, {"token_count", meta.token_count},
        {"seed", meta.seed},                 {"source", source_name(meta.source)},
    };
}

DumpMetadata metadata_from_json(const nlohmann::json& j) {
    static const std::set<std::string> kKeys = {"model_id", "pre_layer",   "post_layer", "seq_len",
                                                "num_sequences", "token_count", "seed",       "source"};
    if (!j.is_object()) throw FormatError("meta.json", "expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!kKeys.contains(key)) throw FormatError(key, "unknown metadata key");
    for (const auto& key : kKeys)
        if (!j.contains(key)) throw FormatError(key, "missing metadata key");

    auto integer = [&](const char* key) {
        const auto& v = j.at(key);
        if (!v.is_number_integer()) throw FormatError(key, "expected an integer");
        return v.get<std::int64_t>();
    };
    DumpMetadata meta;
    if (!j.at("model_id").is_string()) throw FormatError("model_id", "expected a string");
    meta.model_id = j.at("model_id").get<std::string>();
    meta.pre_layer = integer("pre_layer");
    meta.post_layer = integer("post_layer");
    meta.seq_len = integer("seq_len");
    meta.num_sequences = integer("num_sequences");
    meta.token_count = integer("token_count");
    meta.seed = integer("seed");
    const auto& src = j.at("source");
    if (src == "simulator") {
        meta.source = DumpSource::simulator;
    } else if (src == "exporter") {
        meta.source = DumpSource::exporter;
    } else {
        throw FormatError("source", "expected \"simulator\" or \"exporter\"");
    }
    meta.validate();
    return meta;
}

void write_calibration_pair(const std::filesystem::path& dir, const Matrix& pre, const Matrix& post,
                            const DumpMetadata& meta, DType dtype) {
    meta.validate();
    if (pre.rows() != post.rows() || pre.cols() != post.cols())
        throw ConsistencyError("pre and post activations differ in shape");
    if (pre.rows() != static_cast<std::size_t>(meta.token_count))
        throw ConsistencyError("activation rows do not match token_count");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir.string(), ec.message());
    write_actb(dir / kPreFile, pre, dtype);
    write_actb(dir / kPostFile, post, dtype);
    write_json_file(dir / kMetaFile, to_json(meta));
}

CalibrationPair load_calibration_pair(const std::filesystem::path& dir) {
    CalibrationPair pair{read_actb(dir / kPreFile), read_actb(dir / kPostFile),
                         metadata_from_json(read_json_file(dir / kMetaFile))};
    if (pair.pre.rows() != pair.post.rows() || pair.pre.cols() != pair.post.cols()) {
        throw ConsistencyError("pre is " + std::to_string(pair.pre.rows()) + "x" + std::to_string(pair.pre.cols()) +
                               " but post is " + std::to_string(pair.post.rows()) + "x" +
                               std::to_string(pair.post.cols()));
    }
    if (pair.pre.rows() != static_cast<std::size_t>(pair.meta.token_count)) {
        throw ConsistencyError("dump has " + std::to_string(pair.pre.rows()) + " rows but meta.json token_count is " +
                               std::to_string(pair.meta.token_count));
    }
    return pair;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot open for reading");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.filename().string(), e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out << text;
    if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace ghostalign::actdata
