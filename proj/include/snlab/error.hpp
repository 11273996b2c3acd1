#pragma once

#include <stdexcept>
#include <string>

namespace snlab {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid parameters detected before any computation starts.
struct ConfigError : Error {
  using Error::Error;
};

/// Wavepacket width not resolved by the grid or too wide for the domain.
struct ResolutionError : Error {
  using Error::Error;
};

/// Arguments that do not belong together (e.g. densities on different grids).
struct UsageError : Error {
  using Error::Error;
};

/// Probability reached the outer guard band of the grid during evolution.
struct BoundaryOverflowError : Error {
  BoundaryOverflowError(double time, double guard_probability)
      : Error("probability " + std::to_string(guard_probability) +
              " in boundary guard band at t = " + std::to_string(time)),
        time(time),
        guard_probability(guard_probability) {}
  double time;
  double guard_probability;
};

/// Imaginary-time relaxation hit its iteration cap.
struct ConvergenceError : Error {
  ConvergenceError(const std::string& what, double last_delta)
      : Error(what), last_delta(last_delta) {}
  double last_delta;
};

/// A light-cone interval extends beyond the computational domain.
struct DomainError : Error {
  using Error::Error;
};

/// Slice measures passed in the wrong temporal order.
struct OrderingError : Error {
  using Error::Error;
};

/// Measure support larger than the configured cap.
struct SizeError : Error {
  using Error::Error;
};

/// Bisection bracket without a change of the criterion.
struct BracketError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace snlab
