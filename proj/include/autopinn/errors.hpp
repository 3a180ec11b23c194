#pragma once

#include <stdexcept>
#include <string>

namespace autopinn {

/// Bad user input: malformed config, out-of-range hyperparameter, bad file.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Failure while running: numeric overflow, divergence, I/O.
class RuntimeError : public std::runtime_error {
 public:
  explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace autopinn
