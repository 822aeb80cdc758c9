#pragma once

#include <stdexcept>
#include <string>

namespace handkin {

// Malformed input text or file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension or consistency mismatch between inputs.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values, degenerate geometry, failed numerical procedure.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition on a scalar argument violated (range, sign).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace handkin
