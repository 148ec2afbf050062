#pragma once

#include <stdexcept>
#include <string>

namespace msbayes {

/// Base class for all library errors. Each category maps to a CLI exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Invalid parameters or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Linear solve or factorization failure.
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Operations invoked out of order (e.g. an interval without its predecessor state).
class SequencingError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Input data with invalid values.
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// Input data with the wrong shape or encoding.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace msbayes
