#pragma once

#include <stdexcept>
#include <string>

namespace ssvep {

// Input problems: bad arguments, malformed files, invalid specs.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public InputError {
 public:
  using InputError::InputError;
};

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

class SpecError : public InputError {
 public:
  using InputError::InputError;
};

class IoError : public InputError {
 public:
  using InputError::InputError;
};

// Numerically degenerate data (zero variance, singular designs).
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ssvep
