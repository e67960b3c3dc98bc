#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace oscar {

/// Base of every error the library throws. `exit_code()` is what the CLI
/// returns for it: 2 for configuration problems, 3 for numerical failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 3; }
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// NaN/Inf or an unrecoverable negative variance in the moment equations.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, std::uint64_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

/// Internal inconsistency, e.g. a state handed to drift() that was never clamped.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// The Fock truncation cannot hold the requested or reached excitation.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// SME trace drift too large for the step size.
class StepSizeError : public Error {
 public:
  using Error::Error;
};

class PositivityError : public Error {
 public:
  using Error::Error;
};

}  // namespace oscar
