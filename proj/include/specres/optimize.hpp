#pragma once

#include <functional>
#include <vector>

#include "specres/common.hpp"

namespace specres {

// Derivative-free simplex minimizer for the low-dimensional parameter fits
// (tail least squares, profile fitting). Deterministic: no random restarts.
struct SimplexOptions {
  int max_iter = 600;
  double xtol = 1e-12;  // simplex extent, relative to the current point scale
  double ftol = 1e-14;  // value spread across the simplex
};

struct SimplexResult {
  std::vector<double> x;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Minimizes f starting at x0; steps[d] sets the initial simplex extent in
// dimension d (must be nonzero).
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          const std::vector<double>& x0,
                          const std::vector<double>& steps,
                          const SimplexOptions& opts = {});

}  // namespace specres
