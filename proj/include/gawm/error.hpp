#pragma once

#include <stdexcept>
#include <string>

namespace gawm {

// Error taxonomy. The CLI maps these onto exit codes: ConfigError and
// InputError are usage-level (exit 2), CheckpointError is artifact
// incompatibility (exit 3), everything else is internal (exit 1).
struct GawmError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration value or unknown registry key.
struct ConfigError : GawmError {
  using GawmError::GawmError;
};

// Caller passed a malformed argument (out-of-range action, empty input, ...).
struct InputError : GawmError {
  using GawmError::GawmError;
};

// Dimension/agent-count mismatch.
struct ShapeError : InputError {
  using InputError::InputError;
};

// Operation not valid in the current lifecycle state (step after terminal,
// sampling from an empty buffer, ...).
struct StateError : GawmError {
  using GawmError::GawmError;
};

// Non-finite values where finite ones are required.
struct NumericError : GawmError {
  using GawmError::GawmError;
};

// Checkpoint cannot be used with the requested configuration.
struct CheckpointError : GawmError {
  using GawmError::GawmError;
};

}  // namespace gawm
