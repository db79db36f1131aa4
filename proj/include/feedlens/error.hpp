#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace feedlens {

enum class ErrorCode {
  validation,
  state,
  capacity,
  parse,
  monotonicity,
  not_found,
  capability,
  empty_window,
  io,
};

std::string_view to_string(ErrorCode code);

// Engine error with a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m) : Error(ErrorCode::validation, m) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& m) : Error(ErrorCode::state, m) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& m) : Error(ErrorCode::capacity, m) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& m) : Error(ErrorCode::parse, m) {}
};

class MonotonicityError : public Error {
 public:
  explicit MonotonicityError(const std::string& m) : Error(ErrorCode::monotonicity, m) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& m) : Error(ErrorCode::not_found, m) {}
};

class CapabilityError : public Error {
 public:
  explicit CapabilityError(const std::string& m) : Error(ErrorCode::capability, m) {}
};

class EmptyWindowError : public Error {
 public:
  explicit EmptyWindowError(const std::string& m) : Error(ErrorCode::empty_window, m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error(ErrorCode::io, m) {}
};

}  // namespace feedlens
