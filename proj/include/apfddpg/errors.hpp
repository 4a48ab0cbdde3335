#pragma once

#include <stdexcept>

namespace apfddpg {

/// A training update produced a non-finite loss or gradient. Parameters are
/// never mutated with non-finite values; callers decide whether to abort.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration file or model file could not be read or parsed.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace apfddpg
