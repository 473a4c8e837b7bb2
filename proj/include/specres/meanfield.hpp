#ifndef SPECRES_MEANFIELD_HPP
#define SPECRES_MEANFIELD_HPP

#include <string>
#include <vector>

#include "specres/grid.hpp"
#include "specres/model.hpp"

namespace specres {

// Options for the damped fixed-point solver. Validation throws ConfigError.
struct SolverOptions {
  int grid_points = 1024;
  double damping = 0.3;   // mixing fraction of the new iterate, in (0, 1]
  int max_iter = 500;
  double tol = 1e-8;      // L1 distance (density space) of the full map
  double eta = 1e-4;      // i0+ regulator, as a fraction of the grid span
  bool renormalize = true;

  void validate() const;
};

// Converged (or best-effort) solution of the self-consistent system. All
// curves live on one shared uniform grid covering the support of the level
// density. In system mode `indices` are basis indices; in shell mode they
// are shell indices.
struct MeanFieldSolution {
  std::vector<double> grid;
  std::vector<int> indices;
  std::vector<GridFunction> p_of;    // overlap distribution p(lambda) per index
  std::vector<GridFunction> im_g;    // Im G(lambda) per index, >= 0
  std::vector<GridFunction> re_g;    // Re G(lambda) per index
  std::vector<double> level_density; // e^{S(lambda)} on the grid (p <-> density)
  int iterations = 0;
  double residual = 0.0;  // L1 of one full undamped map at the returned state
  bool converged = false;
  int clip_count = 0;     // grid values of Im G clipped up to zero
  bool edge_warning = false;
  std::vector<double> normalization_drift;  // per iteration, pre-renormalization
  std::string diagnostic;

  // Density rho = e^S p for one solved index, on the shared grid.
  GridFunction density(std::size_t family_slot) const;
};

// Im G for one target index from the current distribution family:
//   Im G(lambda) = pi * sum_k coupling_sq[k] * p[k](lambda) * e^{S(lambda)}.
// All members of `p_family` must share one grid. Throws ShapeError on a
// size or grid mismatch.
GridFunction im_g_from_p(const std::vector<GridFunction>& p_family,
                         const std::vector<double>& coupling_sq,
                         const EntropyEstimate& entropy);

// Re G(lambda) = (1/pi) PV int Im G(x)/(lambda - x) dx on the uniform grid.
// Sets *edge_warning when Im G carries noticeable weight at the grid edges
// (the clipped tail then biases the transform).
GridFunction re_g_from_im(const GridFunction& im_g, bool* edge_warning = nullptr);

// One update of the overlap distribution for basis index idx:
//   p(lambda) = (1/(pi e^S)) * Im G / [(lambda - a - vdiag - Re G)^2
//                                      + (Im G + eta_abs)^2],
// renormalized to unit integral against e^S when requested. Negative Im G
// grid values are clipped to zero first (counted via *clip_count). Points
// where the level density vanishes report p = 0. Throws DegenerateError when
// Im G is identically zero (uncoupled index).
GridFunction p_update(int idx, const GridFunction& im_g, const GridFunction& re_g,
                      const CoupledSystem& sys, const EntropyEstimate& entropy,
                      double eta_abs, bool renormalize,
                      int* clip_count = nullptr);

// Solve the coupled self-consistent system for every basis index of `sys`.
// The level density is estimated from the unperturbed energies a + vdiag
// (the solver never sees the exact spectrum). Iteration runs in density
// space with plain damped mixing; `converged` is set only when the full
// undamped map moves the solution by at most opts.tol in L1 per index. When
// the residual stalls for 50 iterations the best iterate is returned with
// converged = false and a diagnostic. Throws DegenerateError when any index
// has no coupling at all.
MeanFieldSolution solve_meanfield(const CoupledSystem& sys, const SolverOptions& opts);

// Shell-reduced solve for a statistical ensemble: indices within one energy
// shell share a single distribution, collapsing the system to n_shells
// equations with effective couplings
//   w2(s, s') = N_{s'} * e^{-S(mid)} * f^2(mid, delta),  N_s = e^{S(c_s)} * bin.
MeanFieldSolution solve_meanfield_shells(const EnsembleProfile& profile,
                                         const SolverOptions& opts,
                                         int n_shells = 32);

}  // namespace specres

#endif  // SPECRES_MEANFIELD_HPP
