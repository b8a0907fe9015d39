#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rds {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A time or step count that does not sit on the path grid.
class GridError : public Error {
 public:
  using Error::Error;
};

/// A request that reaches outside the sampled two-sided window.
class WindowError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Non-finite state produced during integration.
class BlowupError : public Error {
 public:
  BlowupError(const std::string& what, long node) : Error(what), node_(node) {}
  long node() const noexcept { return node_; }

 private:
  long node_;
};

/// Newton inversion of a one-step map did not converge.
class NewtonError : public Error {
 public:
  NewtonError(const std::string& what, long node) : Error(what), node_(node) {}
  long node() const noexcept { return node_; }

 private:
  long node_;
};

/// Numerical procedure could not resolve a quantity (ambiguous splitting,
/// underflowing QR diagonal, too few points ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Bad experiment configuration; the message names the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace rds
