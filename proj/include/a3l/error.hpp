#pragma once

#include <stdexcept>
#include <string>

namespace a3l {

/// Invalid configuration or coding parameters (e.g. n < k, q_s <= 0).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input data: empty traces, mixed sample ids, duplicate indices.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InsufficientChunksError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sample was reported decoded before it was generated.
class CausalityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Configuration file syntax or semantic error, with its line when known.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Output could not be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace a3l
