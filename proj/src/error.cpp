#include "causalmatch/error.hpp"

namespace causalmatch {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::schema: return "schema";
    case ErrorKind::data: return "data";
    case ErrorKind::positivity: return "positivity";
    case ErrorKind::domain: return "domain";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::size: return "size";
    case ErrorKind::weight: return "weight";
    case ErrorKind::singular_design: return "singular_design";
    case ErrorKind::separation: return "separation";
    case ErrorKind::empty_match: return "empty_match";
    case ErrorKind::stratification: return "stratification";
    case ErrorKind::variance: return "variance";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
      return 2;
    case ErrorKind::singular_design:
    case ErrorKind::separation:
    case ErrorKind::stratification:
    case ErrorKind::variance:
    case ErrorKind::numerical:
    case ErrorKind::empty_match:
      return 4;
    default:
      return 3;
  }
}

}  // namespace causalmatch
