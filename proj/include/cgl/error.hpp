#pragma once

#include <stdexcept>
#include <string>

namespace cgl {

// Malformed arguments, out-of-range values, unreadable files. CLI exit code 2.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Run configuration disagrees with the suite it is applied to. CLI exit code 3.
class ConfigMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (e.g. spatial ground truth without a box).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cgl
