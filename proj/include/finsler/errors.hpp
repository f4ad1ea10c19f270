#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace finsler {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Near-zero pivots, degenerate metrics, singular cobasis matrices. Raised
// instead of letting non-finite values propagate, so callers can flag the
// offending sample point.
class NumericDegeneracy : public Error {
public:
  using Error::Error;
};

// A derivative was requested beyond the truncation order carried by a jet.
class OrderExhausted : public Error {
public:
  using Error::Error;
};

// Sample point rejected by the Lagrangian's domain guard.
class GuardRejected : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  ParseError(const std::string& msg, std::size_t offset)
      : Error(msg + " (at byte " + std::to_string(offset) + ")"), offset(offset) {}
  std::size_t offset;
};

// Bad configuration, malformed tensors, out-of-range indices.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

}  // namespace finsler
