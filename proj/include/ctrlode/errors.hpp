// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ctrlode {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The integrator exhausted its step budget before covering the span.
class StepBudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// A state component became NaN or Inf during integration. Usually a sign
/// of stiffness or of a diverging policy.
class NonFiniteState : public Error {
 public:
  using Error::Error;
};

/// The adaptive step shrank below the resolvable width at the current time.
class StepSizeUnderflow : public Error {
 public:
  using Error::Error;
};

/// Dense-output evaluation requested outside the integrated span.
class OutOfDomain : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix dimensions do not agree.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A network was requested with an empty or zero-sized layer.
class InvalidShape : public Error {
 public:
  using Error::Error;
};

/// The adjoint vector diverged on the backward pass.
class NonFiniteAdjoint : public Error {
 public:
  using Error::Error;
};

/// Bad configuration value or unknown configuration key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctrlode
