// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_ERRORS_HPP_
#define CAVSYNC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace cavsync {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Validation failures: bad configuration, out-of-range parameters, or
/// malformed inputs. The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParameterError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// A precondition on model state was violated (e.g. masked input handed to
/// a routine that needs the full patch grid).
class ContractError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace cavsync

#endif  // CAVSYNC_ERRORS_HPP_
