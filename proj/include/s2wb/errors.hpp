#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace s2wb {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (bad index, k, size).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A denominator vanished.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double value)
      : Error(what + " (value " + std::to_string(value) + ")"), value_(value) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// An iterative kernel did not converge within its budget.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Operation requires the positive-trace branch of sigma_2 = 1.
class BranchError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A coefficient f_i = sigma_1 - lambda_i is not positive.
class EllipticityError : public Error {
 public:
  using Error::Error;
};

class SamplerStarvationError : public Error {
 public:
  using Error::Error;
};

/// Spectrum outside the domain of the Legendre-Lewy transform.
class TransformDomainError : public Error {
 public:
  using Error::Error;
};

class ConvexityError : public Error {
 public:
  ConvexityError(const std::string& what, std::size_t node)
      : Error(what + " at node " + std::to_string(node)), node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

/// Newton iteration ran out of iterations or damping; carries the residual history.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : NumericalError(what), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace s2wb
