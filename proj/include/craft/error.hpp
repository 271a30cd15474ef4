#pragma once

#include <stdexcept>
#include <string>

namespace craft {

// Error taxonomy. The CLI maps each family to an exit code:
// ConfigError -> 2, DataError family -> 3, NumericError family -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};
class ParseError : public DataError {
 public:
  using DataError::DataError;
};
class RangeError : public DataError {
 public:
  using DataError::DataError;
};
class NotFoundError : public DataError {
 public:
  using DataError::DataError;
};
class BatchError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};
class DimensionError : public NumericError {
 public:
  using NumericError::NumericError;
};
class SingularityError : public NumericError {
 public:
  using NumericError::NumericError;
};
class ValueError : public NumericError {
 public:
  using NumericError::NumericError;
};
class DomainError : public NumericError {
 public:
  using NumericError::NumericError;
};
// Raised when a metric is mathematically undefined (zero denominator,
// constant input to a correlation).
class UndefinedMetric : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace craft
