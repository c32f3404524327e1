#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sutse {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed inputs: dimension mismatches, non-PSD covariances, bad files.
class InputError : public Error {
public:
  using Error::Error;
};

/// Numerical failures: singular blocks, non-convergence.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// The innovation covariance F_t lost positive definiteness at time `time`
/// (1-based). `dimension` is set when the failing filter is a per-dimension
/// filter of the fast method, otherwise it is -1.
class DivergenceError : public NumericalError {
public:
  DivergenceError(std::ptrdiff_t time, std::ptrdiff_t dimension = -1)
      : NumericalError(make_message(time, dimension)), time_(time), dimension_(dimension) {}

  std::ptrdiff_t time() const noexcept { return time_; }
  std::ptrdiff_t dimension() const noexcept { return dimension_; }

private:
  static std::string make_message(std::ptrdiff_t time, std::ptrdiff_t dimension) {
    std::string msg = "filter divergence: F_t not positive definite at t=" + std::to_string(time);
    if (dimension >= 0) msg += " in dimension j=" + std::to_string(dimension + 1);
    return msg;
  }

  std::ptrdiff_t time_;
  std::ptrdiff_t dimension_;
};

/// Graphical lasso hit its sweep limit. Carries the objective trace.
class GlassoConvergenceError : public NumericalError {
public:
  GlassoConvergenceError(std::string what, std::vector<double> trace)
      : NumericalError(std::move(what)), trace_(std::move(trace)) {}
  const std::vector<double>& objective_trace() const noexcept { return trace_; }

private:
  std::vector<double> trace_;
};

}  // namespace sutse
