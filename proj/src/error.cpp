#include "feedlens/error.hpp"

namespace feedlens {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::validation: return "validation_error";
    case ErrorCode::state: return "state_error";
    case ErrorCode::capacity: return "capacity_error";
    case ErrorCode::parse: return "parse_error";
    case ErrorCode::monotonicity: return "monotonicity_error";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::capability: return "capability_error";
    case ErrorCode::empty_window: return "empty_window";
    case ErrorCode::io: return "io_error";
  }
  return "unknown_error";
}

}  // namespace feedlens
