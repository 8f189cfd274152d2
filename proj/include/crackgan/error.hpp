#pragma once

#include <stdexcept>
#include <string>

namespace crackgan {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: unknown keys, out-of-range hyperparameters,
// inconsistent network specs, missing inputs named on the command line.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or divergent optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed input data (images, masks, manifests, checkpoints).
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace crackgan
