#pragma once

#include <stdexcept>
#include <string>

namespace trustgrid {

// Invalid configuration value; message names the violated bound.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Operation called in a state that does not permit it (terminated game,
// acting out of turn, round not at a boundary).
struct LifecycleError : std::runtime_error {
  explicit LifecycleError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed agent action (probe out of range, bad message shape).
struct ActionError : std::runtime_error {
  explicit ActionError(const std::string& what) : std::runtime_error(what) {}
};

// Vector/matrix size mismatch.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite value where a finite one is required.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// File format / schema version mismatch.
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace trustgrid
