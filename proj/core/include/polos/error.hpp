#pragma once

#include <stdexcept>
#include <string>

namespace polos {

// Malformed or inconsistent input data (bundles, manifests, records).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between vectors, parameters, or configurations.
class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

// A statistic is undefined for the given input (e.g. all scores tied).
class DegenerateStatistic : public DataError {
 public:
  using DataError::DataError;
};

// A value became NaN or infinite during computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration values, unknown keys, or infeasible settings.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace polos
