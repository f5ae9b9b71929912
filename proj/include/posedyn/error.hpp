#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace posedyn {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied arguments or data that violate an operation's preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

// Input is well formed but carries no usable variation (constant series,
// coincident points, zero-variance columns).
class DegenerateInputError : public InputError {
 public:
  using InputError::InputError;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InputError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace posedyn
