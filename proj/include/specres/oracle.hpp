#pragma once

#include <Eigen/Dense>

#include <vector>

#include "specres/grid.hpp"
#include "specres/model.hpp"

namespace specres {

struct Spectrum {
  Eigen::VectorXd eigenvalues;   // sorted ascending
  Eigen::MatrixXd eigenvectors;  // column n is the eigenvector of lambda_n
  int dim() const { return int(eigenvalues.size()); }
  double span() const { return eigenvalues[dim() - 1] - eigenvalues[0]; }
  double mean_spacing() const { return span() / double(dim() - 1); }
};

// Dense symmetric eigensolve; rejects structurally invalid systems.
Spectrum diagonalize(const CoupledSystem& sys);

// Squared overlaps of one basis state with every eigenstate.
struct OverlapSet {
  int basis_index = 0;
  std::vector<double> p;
};
OverlapSet overlaps(const Spectrum& spec, int idx);

// Default smoothing window: 20 mean level spacings.
double default_window(const Spectrum& spec);

// R_idx(z) = sum_n p_n / (z - lambda_n). Throws PoleError when z sits on an
// eigenvalue with no imaginary offset.
Complex resolvent_exact(const Spectrum& spec, int idx, Complex z);

// The projected self-energy at z, in its exact spectral decomposition. The
// `total`/`od`/`cc`/`third` family shares one spectral representation:
//   total = sum_n |<psi_n|w>|^2 / (z - lambda_n),  w = coupling column idx,
//   od    = sum_{j != idx} |V_{idx,j}|^2 R_j(z)    (diagonal-resolvent part),
//   cc    = total - od                             (cross-correlation part),
//   third = sum_{a != b} V_{idx,a} R_a V_{ab} R_b V_{b,idx}  (leading pair
//           approximation to cc; the remainder is fourth order in V).
// `closure` is a different object: the self-energy of the state-deleted
// system, which closes R_idx(z) (z - a - vdiag - closure) = 1 exactly at
// every z. The two agree through third order in V but not beyond.
struct SelfEnergySample {
  Complex z;
  Complex total;
  Complex od;
  Complex cc;
  Complex third;
  Complex closure;
};

SelfEnergySample self_energy_exact(const CoupledSystem& sys,
                                   const Spectrum& spec, int idx, Complex z);

// Batched variant sharing the per-index setup across many z.
std::vector<SelfEnergySample> self_energy_trace(const CoupledSystem& sys,
                                                const Spectrum& spec, int idx,
                                                const std::vector<Complex>& zs);

// Deleted-state self-energy, cached per index for repeated evaluation:
// eigendecomposition of H with row/column idx removed.
class ClosureSelfEnergy {
 public:
  ClosureSelfEnergy(const CoupledSystem& sys, int idx);
  Complex operator()(Complex z) const;

 private:
  Eigen::VectorXd mu_;  // deleted-system eigenvalues
  Eigen::VectorXd q_;   // squared couplings into the deleted eigenbasis
};

// Shell-smoothed overlap distribution on the entropy grid:
// p(lambda) = (sum of p_m in the shell) / (e^S * window). Shares the window
// convention with estimate_entropy; empty shells are dropped.
GridFunction smooth_distribution(const OverlapSet& ov, const Spectrum& spec,
                                 double window);

// Reconstructs the overlap vector from the deleted-state self-energy
// evaluated just below the real axis at each eigenvalue,
//   p_n  ∝  (Im G + eta) / [(lambda_n - a - vdiag - Re G)^2 + (Im G + eta)^2]
//           / (pi e^{S(lambda_n)}),
// normalized to unit sum. The report sweeps eta over a ladder in mean-spacing
// units (finite-eta error must shrink as eta does) and also evaluates the
// headline eta = 1e-6 * span. Deviation metric:
// max_n |p_rec - p_exact| / max_n p_exact.
struct ReconstructionReport {
  std::vector<double> etas;        // descending ladder
  std::vector<double> deviations;  // same order as etas
  double headline_eta = 0.0;
  double headline_deviation = 0.0;
  std::vector<double> p_reconstructed;  // normalized, at the headline eta
};

ReconstructionReport verify_reconstruction(const CoupledSystem& sys,
                                           const Spectrum& spec, int idx,
                                           double window = 0.0);

// Coherent transition weight into eigenstate n:
// |sum_j V_{idx,j} <phi_j|psi_n>|^2 * e^{S(lambda_n)}. Equals the residue of
// the spectral self-energy at lambda_n, scaled by the level density.
double im_g_coherent(const CoupledSystem& sys, const Spectrum& spec, int idx,
                     int n, const EntropyEstimate& entropy);
double im_g_coherent(const CoupledSystem& sys, const Spectrum& spec, int idx,
                     int n);

}  // namespace specres
