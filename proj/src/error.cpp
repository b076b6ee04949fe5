#include "bbkd/error.hpp"

namespace bbkd {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::ShapeMismatch: return "shape_mismatch";
    case ErrorKind::NonFinite: return "non_finite";
    case ErrorKind::State: return "state";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Config: return "config";
    case ErrorKind::Training: return "training";
  }
  return "unknown";
}

}  // namespace bbkd
