#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace specres {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
// 2/sqrt(pi)
inline constexpr double kTwoOverSqrtPi = 1.128379167095512573896158903121545172;
inline constexpr double kSqrt2Pi = 2.506628274631000502415765284811045253;

// Error taxonomy shared by all modules. Each maps to a CLI exit path:
// usage/config problems are reported as such, numeric failures as runtime.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct RangeError : std::range_error {
  using std::range_error::range_error;
};
struct SizeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PoleError : std::runtime_error {
  PoleError(const std::string& msg, double nearest)
      : std::runtime_error(msg), nearest_eigenvalue(nearest) {}
  double nearest_eigenvalue;
};
struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TailRegimeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace specres
