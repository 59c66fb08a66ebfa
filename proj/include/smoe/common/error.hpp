// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace smoe {

/// Invalid configuration value (k out of range, bad split fraction, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation's precondition (shape mismatch, non-scalar loss).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Non-finite input reached a numeric routine.
class NumericDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Class or element index outside its valid range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed external input: unknown token ids, corrupt files.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedVariant : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class NoDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace smoe
