#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace expreuse {

enum class ErrorCode {
  DuplicateId,
  MalformedLanguage,
  UnknownLanguage,
  SchemeMismatch,
  DomainViolation,
  NoDecomposer,
  EmptyDecomposition,
  MissingResponses,
  NoCompleter,
  NoExecutor,
  MissingSignal,
  EmptyResults,
  DuplicateKeyWithDifferentValue,
  MalformedConnection,
  ExecutionFailure,
  InvalidLayout,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (the HTTP layer in particular) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace expreuse
