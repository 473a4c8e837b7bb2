#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "specres/grid.hpp"

namespace specres {

// A Hamiltonian split H = H0 + V with H0 = diag(a) diagonal in the chosen
// basis, V carrying a diagonal part (vdiag) and a Hermitian off-diagonal
// coupling block (vcoupling, zero diagonal). The basis ordering is canonical:
// a sorted ascending.
struct CoupledSystem {
  int dim = 0;
  Eigen::VectorXd a;
  Eigen::VectorXd vdiag;
  Eigen::MatrixXd vcoupling;
  std::string label;
  long seed = -1;  // -1 for deterministic seed-free builders

  // diag(a + vdiag) + vcoupling.
  Eigen::MatrixXd hamiltonian() const;

  // Enforces the structural invariants: shapes, symmetry of vcoupling, zero
  // coupling diagonal, ascending a. Throws ShapeError / DomainError.
  void validate() const;
};

// Open-boundary chain of n_sites spins: the diagonal part is
// sum_i j_zz s^z_i s^z_{i+1} + sum_i h_z s^z_i and the coupling is the
// transverse field g_x sum_i s^x_i, which flips single spins. Deterministic.
CoupledSystem build_ising_chain(int n_sites, double j_zz, double h_z,
                                double g_x);

// Random banded ensemble: level density given by exp(S), variance envelope of
// the couplings |V_{mu nu}|^2 = exp(-S(eps_plus)) f2(eps_plus, delta) with
// eps_plus the mean and delta the difference of the two level energies.
struct EnsembleProfile {
  GridFunction entropy;  // S(eps), dimensionless log density of states
  std::function<double(double, double)> bandwidth_fn;  // f2(eps_plus, delta)
  long seed = 0;
};

// Throws ConfigError when the entropy mass integral disagrees with dim by
// more than 5%; DomainError when the bandwidth envelope goes negative.
CoupledSystem build_banded_ensemble(int dim, const EnsembleProfile& profile);

// Convenience profile: constant S = log(dim / width) on [center - width/2,
// center + width/2] and constant f2. Used by the wide-band tests and CLI.
EnsembleProfile flat_profile(int dim, double center, double width, double f2,
                             long seed);

// Log density of states from overlapping shells of width `window` centered
// on a uniform grid with step window/2. Empty shells are excluded from the
// report rather than written as zeros.
struct EntropyEstimate {
  std::vector<double> lambdas;  // reported shell centers, increasing
  std::vector<double> s_of_lambda;
  double window = 0.0;

  // Linear interpolation between reported centers; DomainError outside them.
  double s_at(double lambda) const;
  // exp(s_at), extended by zero outside the reported hull.
  double e_s_at(double lambda) const;
};

// Throws DomainError unless window exceeds the mean level spacing.
EntropyEstimate estimate_entropy(const std::vector<double>& eigenvalues,
                                 double window);

}  // namespace specres
