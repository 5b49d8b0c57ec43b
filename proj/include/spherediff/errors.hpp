#pragma once

#include <stdexcept>
#include <string>

namespace spherediff {

/// Invalid scenario or parameter combination detected before any computation.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical routine produced a result that cannot be trusted.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace spherediff
