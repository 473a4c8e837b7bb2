#pragma once

#include <vector>

#include "specres/grid.hpp"

namespace specres {

// Hilbert transform convention used throughout:
//   H(f)(x) = (1/pi) PV int f(t) / (x - t) dt.
// Under it, H(Lorentzian(chi)) = (1/pi) x / (x^2 + chi^2) and
// H(Gaussian(sigma)) equals the dispersion profile at chi -> 0.

// Node weight of the piecewise-linear transform: the contribution of the
// sample s nodes to the right of the evaluation point. Odd in s, zero at
// s = 0, asymptotically -1/s.
double hilbert_kernel_weight(long s);

// Transform of samples on a uniform grid, treating the data as a polyline
// that tapers linearly to zero one cell beyond each end. The result does not
// depend on the grid spacing. Direct O(G^2) summation.
std::vector<double> hilbert_uniform_direct(const std::vector<double>& f);

// Same transform via circulant FFT convolution, O(G log G). Agrees with the
// direct path to machine precision; small inputs fall through to it.
std::vector<double> hilbert_uniform(const std::vector<double>& f);

// Transform of a GridFunction on its own (uniform) grid.
// Throws SizeError when the grid is not uniform.
GridFunction hilbert_grid(const GridFunction& f);

// PV transform of a sampled function at a single point. The function is
// resampled onto a uniform grid fine enough to resolve it (at least
// kHilbertPointNodes nodes) with lambda snapped onto a node, then one kernel
// row is applied. If edge_warning is non-null it is set when the sampled
// function carries non-negligible weight at its boundary, where the implicit
// zero extension distorts the tail of the transform.
double hilbert_pv(const GridFunction& f, double lambda,
                  bool* edge_warning = nullptr);

inline constexpr std::size_t kHilbertPointNodes = 2001;

}  // namespace specres
