#pragma once

#include <stdexcept>
#include <string>

namespace meher {

/// Invalid configuration: bad dimensions, out-of-range hyperparameters,
/// unknown enum tags.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An API called out of contract (stepping a finished episode, non-scalar
/// loss, relabeled outcome fed to the success tracker, ...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Non-finite values produced during training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace meher
