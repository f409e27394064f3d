#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace difftraffic {

// Precondition violations (bad sizes, negative speeds, out-of-range steps).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data. Maps to CLI exit code 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Syntax-level failure while reading a file; carries the line number or
// JSON path in its message.
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite loss or gradient. Maps to CLI exit code 2.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, std::size_t index)
      : std::runtime_error(what + " (index " + std::to_string(index) + ")"),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace difftraffic
