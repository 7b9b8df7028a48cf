#include "emtl/error.hpp"

namespace emtl {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::invalid_configuration: return "invalid configuration";
    case ErrorKind::invalid_result: return "invalid result";
    case ErrorKind::parse_error: return "parse error";
    case ErrorKind::degenerate_model: return "degenerate model";
    case ErrorKind::degenerate_evaluation: return "degenerate evaluation";
    case ErrorKind::degenerate_responsibility: return "degenerate responsibility";
    case ErrorKind::singular_system: return "singular system";
    case ErrorKind::numerical_failure: return "numerical failure";
  }
  return "unknown error";
}

bool is_numerical(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::degenerate_model:
    case ErrorKind::degenerate_evaluation:
    case ErrorKind::degenerate_responsibility:
    case ErrorKind::singular_system:
    case ErrorKind::numerical_failure:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

DegenerateResponsibilityError::DegenerateResponsibilityError(std::size_t point_index,
                                                             const std::string& message)
    : Error(ErrorKind::degenerate_responsibility, message), point_index_(point_index) {}

}  // namespace emtl
