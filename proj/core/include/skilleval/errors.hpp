#pragma once

#include <stdexcept>
#include <string>

namespace skilleval {

// Invalid user-supplied configuration (bad ranges, unknown keys).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed or inconsistent on-disk artifact; message names the file.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown during training or evaluation (non-finite values).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace skilleval
