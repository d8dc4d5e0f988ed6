#pragma once

#include <stdexcept>
#include <string>

namespace flowcast {

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or usage (bad flags, malformed config files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A value became non-finite during a computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Training stopped because the loss went non-finite.
class TrainingAbort : public Error {
 public:
  using Error::Error;
};

}  // namespace flowcast
