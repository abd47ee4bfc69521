#include "miti/error.hpp"

namespace miti {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::NotABundle: return "NotABundle";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::ExtractionFailed: return "ExtractionFailed";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DuplicateChunkId: return "DuplicateChunkId";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::ScriptMiss: return "ScriptMiss";
    case ErrorCode::ContextModeMismatch: return "ContextModeMismatch";
    case ErrorCode::NoTasksFound: return "NoTasksFound";
    case ErrorCode::NoCallsFound: return "NoCallsFound";
    case ErrorCode::EmptyTruth: return "EmptyTruth";
    case ErrorCode::TruthNotInCorpus: return "TruthNotInCorpus";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::BackendUnreachable: return "BackendUnreachable";
    case ErrorCode::HttpStatus: return "HttpStatus";
    }
    return "Unknown";
}

bool is_backend_error(ErrorCode code) noexcept {
    return code == ErrorCode::BackendUnreachable || code == ErrorCode::HttpStatus;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

HttpStatusError::HttpStatusError(int status, std::string body_excerpt)
    : Error(ErrorCode::HttpStatus, "HTTP " + std::to_string(status) + ": " + body_excerpt),
      status_(status),
      body_excerpt_(std::move(body_excerpt)) {}

}  // namespace miti
