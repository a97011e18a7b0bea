#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace postbias {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Density evaluated at a point where it is 0 or unbounded (Weibull at x = 0).
class SingularPointError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Mismatched vector/matrix lengths.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Inputs that violate a cross-object contract, e.g. a log-likelihood matrix
/// paired with draws it was not computed from.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A log-likelihood or statistic evaluated to NaN/inf.
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, std::size_t draw, std::size_t observation)
      : Error(what), draw_(draw), observation_(observation) {}

  std::size_t draw() const noexcept { return draw_; }
  std::size_t observation() const noexcept { return observation_; }

 private:
  std::size_t draw_;
  std::size_t observation_;
};

/// Sampler could not start (non-finite log-posterior at the initial point).
class InitializationError : public Error {
 public:
  using Error::Error;
};

/// Posterior covariance not positive definite: parameters not identifiable or
/// extremely correlated.
class SingularCovarianceError : public Error {
 public:
  using Error::Error;
};

/// Ground-truth engine cannot be applied to this model/data.
class OracleUnavailableError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (bad flag value, non-PD covariate covariance, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A replication study excluded more replicates than its failure cap allows.
class StudyError : public Error {
 public:
  using Error::Error;
};

/// Wraps an error raised inside one round of the quasi-prior iteration.
class StepError : public Error {
 public:
  StepError(std::size_t step, const std::string& what)
      : Error("step " + std::to_string(step) + ": " + what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace postbias
