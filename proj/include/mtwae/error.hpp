#pragma once

#include <stdexcept>
#include <string>

namespace mtwae {

/// Malformed or unreadable input. Maps to CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structurally invalid object (bad parent index, wrong vector length).
class InvalidArgument : public InputError {
 public:
  using InputError::InputError;
};

/// Local normalization hit a parent branch with zero persistence.
class DegenerateError : public InputError {
 public:
  DegenerateError(const std::string& what, int branch)
      : InputError(what), branch_(branch) {}
  int branch() const { return branch_; }

 private:
  int branch_;
};

/// Solver failure or non-finite value. Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mtwae
