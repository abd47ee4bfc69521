#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace miti {

enum class ErrorCode {
    // input / validation
    MalformedJson,
    NotABundle,
    MissingField,
    InvalidConfig,
    InvalidArgument,
    SchemaViolation,
    DuplicateId,
    ExtractionFailed,
    EmptyText,
    EmptyInput,
    DimensionMismatch,
    ZeroVector,
    DuplicateChunkId,
    IoError,
    FormatVersionMismatch,
    ChecksumMismatch,
    ScriptMiss,
    ContextModeMismatch,
    NoTasksFound,
    NoCallsFound,
    EmptyTruth,
    TruthNotInCorpus,
    UnknownTask,
    KeyMismatch,
    // backend / transport
    BackendUnreachable,
    HttpStatus,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for errors caused by a remote service rather than by the caller's input.
bool is_backend_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix, for re-wrapping with more context.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

/// Raised for non-2xx responses; carries the status and a body excerpt.
class HttpStatusError : public Error {
public:
    HttpStatusError(int status, std::string body_excerpt);

    int status() const noexcept { return status_; }
    const std::string& body_excerpt() const noexcept { return body_excerpt_; }

private:
    int status_;
    std::string body_excerpt_;
};

}  // namespace miti
