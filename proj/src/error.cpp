#include "urbanfuse/error.hpp"

namespace urbanfuse {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::parse: return "parse";
    case ErrorCode::format: return "format";
    case ErrorCode::version: return "version";
    case ErrorCode::corruption: return "corruption";
    case ErrorCode::alignment: return "alignment";
    case ErrorCode::config: return "config";
    case ErrorCode::join: return "join";
    case ErrorCode::shape: return "shape";
    case ErrorCode::dead_end: return "dead-end";
    case ErrorCode::isolated_node: return "isolated-node";
    case ErrorCode::missing_node: return "missing-node";
    case ErrorCode::ordering: return "ordering";
    case ErrorCode::io: return "io";
    case ErrorCode::validation: return "validation";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + " error: " + message), code_(code), message_(message) {}

}  // namespace urbanfuse
