#pragma once

#include <stdexcept>
#include <string>

namespace brw {

// Bad user input: malformed laws, configs, file schemas.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A numerical routine could not produce a trustworthy result.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonFiniteMgf : NumericalError {
  using NumericalError::NumericalError;
};

// The recursion ran out of environment data to the left of the target site.
struct WindowUnderflow : NumericalError {
  using NumericalError::NumericalError;
};

struct NoTiltSolution : NumericalError {
  using NumericalError::NumericalError;
};

struct DegenerateVariance : NumericalError {
  using NumericalError::NumericalError;
};

struct DomainTooSmall : NumericalError {
  using NumericalError::NumericalError;
};

struct Instability : NumericalError {
  using NumericalError::NumericalError;
};

struct FrontNotFormed : NumericalError {
  using NumericalError::NumericalError;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace brw
