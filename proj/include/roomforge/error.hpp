#pragma once

#include <stdexcept>
#include <string>

namespace roomforge {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A well-formed input that violates a contract (bad rule, weights that do
/// not sum to one, an unknown label key, ...). Maps to CLI exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, truncated or malformed input data. Maps to CLI exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Syntax error in a text format, carrying the byte offset of the problem.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t position);

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

}  // namespace roomforge
