#pragma once

#include <stdexcept>
#include <string>

namespace peract {

// Raised when an argument violates a documented precondition.
class InvalidInput : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// A continuous pose that does not fall inside the workspace grid.
class OutOfBounds : public std::out_of_range {
public:
  using std::out_of_range::out_of_range;
};

// On-disk artifact written by an incompatible format version.
class IncompatibleVersion : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Truncated or malformed on-disk artifact.
class CorruptData : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Training produced NaN/Inf; the message names the offending head.
class NonFiniteLoss : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace peract
