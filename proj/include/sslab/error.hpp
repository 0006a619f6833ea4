#pragma once

#include <stdexcept>
#include <string>

namespace sslab {

// Exit-code mapping used by the CLI: config 2, numerical 3, guard 4.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-convergence of an iterative method; carries the final residual.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace sslab
