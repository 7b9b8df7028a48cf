#pragma once

#include <stdexcept>
#include <string>

namespace emtl {

enum class ErrorKind {
  invalid_input,
  invalid_configuration,
  invalid_result,
  parse_error,
  degenerate_model,
  degenerate_evaluation,
  degenerate_responsibility,
  singular_system,
  numerical_failure,
};

const char* to_string(ErrorKind kind);

// True for the kinds that originate in the numerics rather than in the
// caller's input (the CLI maps these to exit code 2).
bool is_numerical(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by e_step when a target point cannot be generated by any component.
class DegenerateResponsibilityError : public Error {
 public:
  DegenerateResponsibilityError(std::size_t point_index, const std::string& message);

  std::size_t point_index() const noexcept { return point_index_; }

 private:
  std::size_t point_index_;
};

}  // namespace emtl
