#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wde {

enum class ErrorKind {
  unsupported_family,
  numerical_failure,
  resolution,
  degenerate_family,
  degenerate_schedule,
  construction,
  config,
  parse,
  io,
  version_mismatch,
  invalid_argument,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

}  // namespace wde
