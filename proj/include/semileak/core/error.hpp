#pragma once

#include <stdexcept>
#include <string>

namespace semileak {

// Error taxonomy. The CLI maps each kind onto a distinct exit code.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PrerequisiteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or argument contract violated by the caller.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace semileak
