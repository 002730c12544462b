#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace avarkit {

/// Machine-readable failure category. The string form is what the CLI
/// reports in its error object.
enum class ErrorCode {
    empty_input,
    parse_error,
    sampling_error,
    data_error,
    invalid_argument,
    invalid_spec,
    grid_mismatch,
    series_too_short,
    io_error,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for everything the library throws on bad input.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Malformed CSV content; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message);

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Non-finite sample; carries channel and 0-based sample index.
class DataError : public Error {
public:
    DataError(std::string channel, std::size_t index, const std::string& message);

    const std::string& channel() const noexcept { return channel_; }
    std::size_t index() const noexcept { return index_; }

private:
    std::string channel_;
    std::size_t index_;
};

/// Spec document failed validation; `field` names the offending JSON path.
class SpecError : public Error {
public:
    SpecError(std::string field, std::string detail)
        : Error(ErrorCode::invalid_spec, field + ": " + detail),
          field_(std::move(field)),
          detail_(std::move(detail)) {}

    const std::string& field() const noexcept { return field_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string field_;
    std::string detail_;
};

}  // namespace avarkit
