// SPDX-FileCopyrightText: © 2026 GhostAlign Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ghostalign {

/// Coarse error class; the CLI maps it to an exit code.
enum class ErrorCategory { config, data, numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorCategory::data, "shape error: " + what) {}
};

class FormatError : public Error {
public:
    FormatError(std::string field, const std::string& what)
        : Error(ErrorCategory::data, "format error in '" + field + "': " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class LengthError : public Error {
public:
    explicit LengthError(const std::string& what) : Error(ErrorCategory::data, "length error: " + what) {}
};

class ConsistencyError : public Error {
public:
    explicit ConsistencyError(const std::string& what)
        : Error(ErrorCategory::data, "consistency error: " + what) {}
};

class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& what)
        : Error(ErrorCategory::data, "I/O error on '" + path + "': " + what) {}
};

class UnsupportedDimensionError : public Error {
public:
    explicit UnsupportedDimensionError(const std::string& what)
        : Error(ErrorCategory::data, "unsupported dimension: " + what) {}
};

class DegenerateInputError : public Error {
public:
    explicit DegenerateInputError(const std::string& what)
        : Error(ErrorCategory::numerical, "degenerate input: " + what) {}
};

class ConvergenceError : public Error {
public:
    explicit ConvergenceError(const std::string& what)
        : Error(ErrorCategory::numerical, "convergence error: " + what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorCategory::numerical, "numerical error: " + what) {}
};

/// Argument outside an operation's domain (for example n >= L).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorCategory::config, "domain error: " + what) {}
};

class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(ErrorCategory::config, "config error on '" + key + "': " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace ghostalign
