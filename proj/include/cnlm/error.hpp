#pragma once

#include <stdexcept>
#include <string>

namespace cnlm {

// Malformed or inconsistent input data (encoding, alignment, file formats).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values or combinations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite losses or gradients, diverging training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or vector dimensions that do not agree.
class ShapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cnlm
