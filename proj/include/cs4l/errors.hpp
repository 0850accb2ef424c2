#pragma once

#include <stdexcept>
#include <string>

namespace cs4l {

// Bad input files: missing, truncated, corrupt records, unknown formats.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user configuration (unknown arch, missing colorizer, bad flags).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite activations, losses or gradients.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (shape or batch-size mismatch).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cs4l
