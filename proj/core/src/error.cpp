#include "avarkit/error.hpp"

namespace avarkit {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::empty_input: return "empty_input";
        case ErrorCode::parse_error: return "parse_error";
        case ErrorCode::sampling_error: return "sampling_error";
        case ErrorCode::data_error: return "data_error";
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::invalid_spec: return "invalid_spec";
        case ErrorCode::grid_mismatch: return "grid_mismatch";
        case ErrorCode::series_too_short: return "series_too_short";
        case ErrorCode::io_error: return "io_error";
    }
    return "unknown";
}

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error(ErrorCode::parse_error, "line " + std::to_string(line) + ": " + message), line_(line) {}

DataError::DataError(std::string channel, std::size_t index, const std::string& message)
    : Error(ErrorCode::data_error,
            channel + "[" + std::to_string(index) + "]: " + message),
      channel_(std::move(channel)),
      index_(index) {}

}  // namespace avarkit
