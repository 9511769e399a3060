#pragma once

#include <stdexcept>
#include <string>

namespace ergm {

/// Unreadable or unwritable files and malformed input (exit code 4 at the CLI).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public IoError {
 public:
  ParseError(int line, const std::string& what)
      : IoError("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Base for estimation failures that are properties of the data rather than
/// of the call (exit code 3 at the CLI).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Logistic fit diverges: the responses are (quasi-)perfectly separated.
class SeparationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Pseudo-information matrix is rank deficient (collinear statistics).
class SingularInformationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace ergm
