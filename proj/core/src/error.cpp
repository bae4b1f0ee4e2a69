#include <expreuse/error.hpp>

namespace expreuse {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MalformedLanguage: return "MalformedLanguage";
    case ErrorCode::UnknownLanguage: return "UnknownLanguage";
    case ErrorCode::SchemeMismatch: return "SchemeMismatch";
    case ErrorCode::DomainViolation: return "DomainViolation";
    case ErrorCode::NoDecomposer: return "NoDecomposer";
    case ErrorCode::EmptyDecomposition: return "EmptyDecomposition";
    case ErrorCode::MissingResponses: return "MissingResponses";
    case ErrorCode::NoCompleter: return "NoCompleter";
    case ErrorCode::NoExecutor: return "NoExecutor";
    case ErrorCode::MissingSignal: return "MissingSignal";
    case ErrorCode::EmptyResults: return "EmptyResults";
    case ErrorCode::DuplicateKeyWithDifferentValue: return "DuplicateKeyWithDifferentValue";
    case ErrorCode::MalformedConnection: return "MalformedConnection";
    case ErrorCode::ExecutionFailure: return "ExecutionFailure";
    case ErrorCode::InvalidLayout: return "InvalidLayout";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace expreuse
