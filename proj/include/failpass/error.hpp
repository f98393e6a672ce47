#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace failpass {

enum class ErrorKind {
  invalid_argument,
  unparseable_configuration,
  project_not_found,
  retryable,
  corrupt_archive,
  io,
  parse,
  configuration,
  state_unrecoverable,
  project_specific,
  ci_command_issue,
  not_a_fail_side,
  duplicate,
  unsupported_language,
  artifact_not_found,
};

std::string_view to_string(ErrorKind kind);

// Every failure the library reports carries a machine-readable kind; callers
// branch on kind(), never on message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Transient failures (network, rate limit, short reads) may be retried.
  bool retryable() const noexcept { return kind_ == ErrorKind::retryable; }

 private:
  ErrorKind kind_;
};

// Parse failure with a 0-based character position into the parsed text.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(ErrorKind::parse,
              message + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace failpass
