#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace exspec {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An input violates a documented precondition (sign, range, margins).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Exhaustive enumeration was requested on an instance that is too large.
class CombinatorialError : public Error {
 public:
  using Error::Error;
};

/// A randomized generator gave up after its retry cap.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; `line` is 1-based (0 when unknown).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace exspec
