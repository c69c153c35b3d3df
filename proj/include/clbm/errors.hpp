#ifndef CLBM_ERRORS_HPP_
#define CLBM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace clbm {

/// Base of every error raised by the library. `exit_code()` is the process
/// status the CLI reports for this error class.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual int exit_code() const noexcept { return 1; }
};

/// Invalid configuration: unknown lattice, bad grid size, unknown JSON key.
class ConfigError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 2; }
};

/// Input outside the mathematical domain of an operation (rho <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 2; }
};

/// Caller misuse: dimension mismatch, degree 0, too few samples.
class UsageError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 2; }
};

/// NaN/Inf during integration, non-diagonalizable matrix, failed convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 3; }
};

/// A configured size cap was exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 4; }
};

}  // namespace clbm

#endif  // CLBM_ERRORS_HPP_
