#pragma once

#include <stdexcept>
#include <string>

namespace skpd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array or block dimensions that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An input outside an operation's domain (negative ridge, empty grid, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Iterative method stopped before meeting its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Matrix that is singular (or not PSD) where an inverse is required.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// Least-squares design without full column rank; carries a ridge that fixes it.
class RankDeficientError : public Error {
 public:
  RankDeficientError(const std::string& what, double suggested_ridge)
      : Error(what), suggested_ridge_(suggested_ridge) {}
  double suggested_ridge() const noexcept { return suggested_ridge_; }

 private:
  double suggested_ridge_;
};

/// Data with no usable signal, e.g. an all-zero response.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

/// File format and filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace skpd
