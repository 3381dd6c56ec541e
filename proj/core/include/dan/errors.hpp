#pragma once

#include <stdexcept>
#include <string>

namespace dan {

/// Bad run configuration: unknown keys, invalid combinations, missing paths.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input data (corpora, embeddings, dumps).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure during optimization (NaN/Inf gradients).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dan
