#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bbkd {

/// Coarse failure categories. The CLI prints the category name as the first
/// token of its single-line error message and maps it to an exit code.
enum class ErrorKind {
  InvalidArgument,
  ShapeMismatch,
  NonFinite,
  State,
  Io,
  Format,
  Config,
  Training,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace bbkd
