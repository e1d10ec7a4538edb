#pragma once

#include <stdexcept>
#include <string>

namespace gradorder {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad sizes, bad configuration values, malformed inputs.
struct InvalidArgumentError : Error {
  using Error::Error;
};

// A sequence that is not a permutation of {0..N-1}.
struct InvalidPermutationError : InvalidArgumentError {
  using InvalidArgumentError::InvalidArgumentError;
};

// The trajectory left the finite range; carries the epoch where it happened.
struct DivergenceError : Error {
  int epoch;
  DivergenceError(int q, const std::string& what) : Error(what), epoch(q) {}
};

// A metric asked for data the trace does not carry (e.g. inner iterates).
struct UnavailableMetricError : Error {
  using Error::Error;
};

// Certificate constants that violate their constraints.
struct InvalidConstantsError : InvalidArgumentError {
  using InvalidArgumentError::InvalidArgumentError;
};

// A property that must hold deterministically failed.
struct PropertyViolationError : Error {
  using Error::Error;
};

// File or serialization problems.
struct IoError : Error {
  using Error::Error;
};

}  // namespace gradorder
