#pragma once

#include <stdexcept>
#include <string>

namespace pillarmetry {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid value passed to an operation (bad dimension, bad config, ...).
class InvalidArgumentError : public Error {
public:
    explicit InvalidArgumentError(const std::string& msg) : Error(msg) {}
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Structured parse failure; `kind()` identifies what went wrong so callers
/// can distinguish e.g. a truncated payload from an unsupported bit depth.
class ParseError : public Error {
public:
    enum class Kind {
        EmptyInput,
        MalformedHeader,
        TruncatedPayload,
        TrailingData,
        UnsupportedDepth,
        RaggedRows,
        BadNumber,
        BadSchema,
    };

    ParseError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Thrown by automatic thresholding when the histogram has fewer than two
/// populated bins.
class DegenerateHistogramError : public Error {
public:
    explicit DegenerateHistogramError(const std::string& msg) : Error(msg) {}
};

/// Dataset violates the normalization preconditions (empty row, non-positive
/// area).
class InvalidDatasetError : public Error {
public:
    explicit InvalidDatasetError(const std::string& msg) : Error(msg) {}
};

/// Correlation is undefined for the given series (constant input).
class UndefinedCorrelationError : public Error {
public:
    explicit UndefinedCorrelationError(const std::string& msg) : Error(msg) {}
};

/// Least-squares fit could not be solved (degenerate support).
class FitError : public Error {
public:
    explicit FitError(const std::string& msg) : Error(msg) {}
};

/// A structure footprint would fall outside the rendered raster.
class SceneTooLargeError : public Error {
public:
    explicit SceneTooLargeError(const std::string& msg) : Error(msg) {}
};

}  // namespace pillarmetry
