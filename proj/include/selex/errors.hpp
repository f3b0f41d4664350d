#pragma once

#include <stdexcept>
#include <string>

namespace selex {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A precondition on caller-supplied data was violated.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
/// The best available estimate is carried along.
class ConvergenceFailure : public Error {
public:
  ConvergenceFailure(const std::string& what, double value, double err_est)
      : Error(what), value_(value), err_est_(err_est) {}

  double value() const noexcept { return value_; }
  double err_est() const noexcept { return err_est_; }

private:
  double value_;
  double err_est_;
};

/// The two-population stationarity equation could not be bracketed.
/// Unreachable for valid input; signals an internal defect.
class RootBracketFailure : public Error {
public:
  using Error::Error;
};

/// Output could not be written.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace selex
