#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace urbanfuse {

enum class ErrorCode {
  invalid_input,
  parse,
  format,
  version,
  corruption,
  alignment,
  config,
  join,
  shape,
  dead_end,
  isolated_node,
  missing_node,
  ordering,
  io,
  validation,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  /// The message without the "<code> error: " prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace urbanfuse
