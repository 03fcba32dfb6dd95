// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dafc {

// Every failure raised by the library derives from Error so the CLI can map
// it onto an exit code with a single catch.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument value: angle outside the field of view, rho >= 1, nu <= 0, ...
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, failed factorizations, singular systems.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

// Malformed config files, missing checkpoints, unknown keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dafc
