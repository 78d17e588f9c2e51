/**
 * error.hpp
 *
 * Exception types raised by the MAIC estimators and file loaders.
 */

#ifndef MAIC_ERROR_HPP
#define MAIC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace maic {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad file contents, failed invariant, dimension mismatch.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// No method-of-moments solution exists (separation / target outside hull).
class InfeasibleBalance : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// Logistic likelihood unbounded: a linear combination of covariates
/// perfectly predicts treatment.
class PerfectSeparation : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

/// Raised by the bootstrap when the share of failed resamples exceeds the
/// configured ceiling.
class TooManyFailures : public Error {
 public:
  using Error::Error;
};

}  // namespace maic

#endif  // MAIC_ERROR_HPP
