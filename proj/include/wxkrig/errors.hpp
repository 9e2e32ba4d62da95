#pragma once

#include <stdexcept>
#include <string>

namespace wxkrig {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidCoordinateError : public Error {
 public:
  using Error::Error;
};

class NoCandidatesError : public Error {
 public:
  using Error::Error;
};

class NoDataError : public Error {
 public:
  using Error::Error;
};

class StructuralError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class InsufficientBinsError : public Error {
 public:
  using Error::Error;
};

// All empirical semivariances are zero; no covariance model can be fitted.
// Signals the IDW fallback in prediction pipelines.
class DegenerateFieldError : public Error {
 public:
  using Error::Error;
};

// A covariance fit ran out of iterations without meeting the tolerance.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

class SingularDesignError : public Error {
 public:
  using Error::Error;
};

// Covariance matrix could not be factorized even after diagonal jitter.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class MissingCovariateError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class PeriodError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class UndefinedMomentError : public Error {
 public:
  using Error::Error;
};

class FoldError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class ServiceError : public Error {
 public:
  using Error::Error;
};

class OfflineMissError : public Error {
 public:
  using Error::Error;
};

}  // namespace wxkrig
