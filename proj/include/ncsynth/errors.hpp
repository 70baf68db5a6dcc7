#pragma once

#include <stdexcept>
#include <string>

namespace ncsynth {

/// Caller violated an operation's precondition (bad argument, mixed managers, ...).
class UsageError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A BDD file could not be read: bad magic, unsupported version, truncated data.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Integration produced a non-finite successor while abstracting a cell.
class AbstractionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Configuration document is malformed or inconsistent.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Synthesis found no state from which the specification can be enforced.
class EmptyController : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The closed loop reached a state the controller has no input for.
class DomainViolation : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace ncsynth
