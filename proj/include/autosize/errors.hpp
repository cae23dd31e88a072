// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace autosize {

/// Bad argument values: non-finite entries, broken permutations, negative radii.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tensor shapes that do not conform to an operation's contract.
class ShapeError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// API misuse, e.g. backward on a tape with no recorded forward pass.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss, gradient or update during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed checkpoint or record file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Compaction that would change the model function.
class PruneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace autosize
