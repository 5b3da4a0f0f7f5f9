#pragma once

#include <stdexcept>
#include <string>

namespace gva {

// Precondition or shape violation in a library call.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Iteration caps, singular pivots, blow-ups and other numerical failures.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed data sets or diverging experts.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejected configuration files (unknown keys, bad types, invalid values).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gva
