#include "wde/error.hpp"

namespace wde {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::unsupported_family: return "unsupported family";
    case ErrorKind::numerical_failure: return "numerical failure";
    case ErrorKind::resolution: return "resolution error";
    case ErrorKind::degenerate_family: return "degenerate family";
    case ErrorKind::degenerate_schedule: return "degenerate schedule";
    case ErrorKind::construction: return "construction error";
    case ErrorKind::config: return "config error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::io: return "i/o error";
    case ErrorKind::version_mismatch: return "version mismatch";
    case ErrorKind::invalid_argument: return "invalid argument";
  }
  return "error";
}

}  // namespace wde
