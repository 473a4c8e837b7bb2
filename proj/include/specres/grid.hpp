#pragma once

#include <vector>

#include "specres/common.hpp"

namespace specres {

// Sampled real function on a strictly increasing grid. Values are assumed to
// be zero outside the grid span; operations that are sensitive to leaked edge
// mass expose a warning flag instead of failing.
struct GridFunction {
  std::vector<double> lambdas;
  std::vector<double> values;

  GridFunction() = default;
  GridFunction(std::vector<double> xs, std::vector<double> ys);

  std::size_t size() const { return lambdas.size(); }
  double front() const { return lambdas.front(); }
  double back() const { return lambdas.back(); }
  double span() const { return lambdas.back() - lambdas.front(); }

  // True when the spacing is uniform to within a relative tolerance; uniform
  // grids get the O(G log G) Hilbert path.
  bool is_uniform(double rel_tol = 1e-9) const;
  double step() const;  // spacing of a uniform grid (SizeError otherwise)

  // Piecewise-linear interpolation, zero outside the span.
  double value_at(double x) const;

  // Trapezoid integral over the full span.
  double integral() const;

  double max_value() const;
  double min_value() const;
  // Grid point with the largest value.
  double argmax() const;
};

// Uniform grid helper: n points covering [lo, hi] inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t n);

// max(|f| at the two edges) / max|f|; a value above threshold means the
// zero-outside assumption is materially violated.
double edge_fraction(const GridFunction& f);
inline constexpr double kEdgeWarnFraction = 1e-3;

// L1 distance between two functions on the same grid (ShapeError otherwise).
double l1_distance(const GridFunction& a, const GridFunction& b);

}  // namespace specres
