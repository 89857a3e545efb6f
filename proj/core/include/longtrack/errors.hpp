#pragma once

#include <stdexcept>
#include <string>

namespace longtrack {

// Exception families map onto CLI exit codes: ConfigError -> 2,
// DataError -> 3, NumericError -> 4. ShapeError is a precondition
// violation on tensor/image dimensions and is reported as a data error.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace longtrack
