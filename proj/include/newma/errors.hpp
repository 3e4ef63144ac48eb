#pragma once

#include <stdexcept>
#include <string>

namespace newma {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: bad parameter ranges, inconsistent specs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Invalid data fed to an operation (dimension mismatch, malformed rows).
class InputError : public Error {
 public:
  using Error::Error;
};

// Filesystem / stream problems.
class IoError : public Error {
 public:
  using Error::Error;
};

// Numerical failures: singular systems, resource caps exceeded.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace newma
