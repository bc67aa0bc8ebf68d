#pragma once

#include <stdexcept>
#include <string>

namespace cure {

// Invalid parameters, configs or input data. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Shape mismatch between a decision variable and the data it is applied to.
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// File could not be read or written (exit code 4).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown (non-finite objective, failed factorization).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cure
