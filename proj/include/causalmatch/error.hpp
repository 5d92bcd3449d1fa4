#pragma once

#include <stdexcept>
#include <string>

namespace causalmatch {

enum class ErrorKind {
  config,
  schema,
  data,
  positivity,
  domain,
  degenerate,
  dimension,
  size,
  weight,
  singular_design,
  separation,
  empty_match,
  stratification,
  variance,
  numerical,
};

const char* to_string(ErrorKind kind);

// Process exit code for a fatal error of this kind: 2 config, 3 data, 4 numerical.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace causalmatch
