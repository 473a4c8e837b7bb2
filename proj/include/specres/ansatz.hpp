#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "specres/common.hpp"
#include "specres/meanfield.hpp"
#include "specres/model.hpp"

namespace specres {

// Parameter records of the profile family, per shell (or per basis index,
// which is the one-state-per-shell special case). Shifts are measured from
// the shell center: the Lorentzian peak sits at c + delta, the Gaussian
// envelope at c + delta_prime.
struct LorentzParams {
  double chi = 0.0;  // half width, > 0
  double delta = 0.0;
};

struct GaussParams {
  double sigma = 0.0;  // envelope width, > 0
  double delta_prime = 0.0;
};

struct VoigtParams {
  double delta = 0.0;
  double delta_prime = 0.0;
  double chi = 0.0;
  double sigma = 0.0;
  void validate() const;  // chi, sigma > 0 and a positive normalization
};

// Boundary self-energy built from Faddeeva windows:
//   G(lambda) = delta_eff - vdiag + i chi_eff w(-(lambda - center)/(sqrt2 sigma))
// plus an optional second window (delta2 + i chi2 w(.; sigma2, center2)).
// Positive widths make Im G >= 0 everywhere, so the induced spectral
// function is causal and carries unit mass by construction.
struct EffectiveSelfEnergy {
  double delta_eff = 0.0;
  double chi_eff = 0.0;  // > 0
  double sigma = 0.0;    // > 0
  double center = 0.0;   // Gaussian anchor (a + delta_prime in matched use)
  double vdiag = 0.0;

  bool has_second = false;
  double delta2 = 0.0;
  double chi2 = 0.0;
  double sigma2 = 0.0;
  double center2 = 0.0;

  void validate() const;
};

// Aggregated shell system shared by the parameter-level solvers: centers,
// diagonal couplings, and the pair weights w2(s, t) entering shell s's sums.
struct ShellCouplings {
  std::vector<double> centers;  // ascending
  std::vector<double> vdiag;    // same length (zero-filled when absent)
  Eigen::MatrixXd w2;           // nonnegative, w2(s, t) for target shell t

  std::size_t size() const { return centers.size(); }
  void validate() const;
};

// Shell reduction of a statistical ensemble profile: centers at the midpoints
// of n_shells equal bins over the entropy support, weights
// w2(s, t) = exp(S(c_t)) * bin * exp(-S(mid)) * f2(mid, delta).
ShellCouplings reduce_to_shells(const EnsembleProfile& profile, int n_shells);

// One shell per basis index: centers a, diagonal couplings vdiag,
// weights |V_ij|^2.
ShellCouplings shells_from_system(const CoupledSystem& sys);

// Where each shell's self-consistency equation is pinned. The default tracks
// the current peak of the shell's own profile iterate.
struct MatchingRule {
  enum class Kind { peak, center, fixed };
  Kind kind = Kind::peak;
  std::vector<double> lambdas;  // per-shell points, used by Kind::fixed
};

struct AnsatzSolveReport {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;        // fixed-point residual at the returned params
  double misfit = 0.0;          // relative rms model misfit (tail solvers)
  std::vector<double> history;  // residual per sweep
  std::string diagnostic;
};

// Damped fixed-point iteration of the width/shift equations
//   chi_s = sum_t w2(s,t) chi_t / (d^2 + chi_t^2),
//   delta_s - vdiag_s = sum_t w2(s,t) d / (d^2 + chi_t^2),
// with d = lambda_s - c_t - delta_t at the shell's matching point. Throws
// DegenerateError when a shell is uncoupled or its width collapses to zero;
// without a report, non-convergence raises ConvergenceError.
std::vector<LorentzParams> solve_lorentz(const ShellCouplings& sc,
                                         const MatchingRule& rule,
                                         const SolverOptions& opts,
                                         AnsatzSolveReport* report = nullptr);

// Tail-regime solver: on each shell's tail grid the log of
//   [lambda - c_s - vdiag_s]^2 gauss(dl'_s; sigma_s) / sigma-normalization
// is fitted in least squares to the log of the coupling-weighted Gaussian
// sum, sweeping shells with damping until the parameters settle. Throws
// TailRegimeError when the tail carries no Gaussian decay.
std::vector<GaussParams> solve_gauss_tail(const ShellCouplings& sc,
                                          const std::vector<LorentzParams>& bulk,
                                          const SolverOptions& opts,
                                          AnsatzSolveReport* report = nullptr);

struct VoigtSolveReport {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;               // parameter fixed-point residual
  std::vector<double> near_residuals;  // per shell, at the matching point
  std::vector<double> far_residuals;   // per shell, relative rms on the tail
  std::string diagnostic;
};

// Alternating solver for the four-parameter profiles: the near-center
// condition updates (delta, chi) explicitly at each shell's peak, the far
// condition updates (sigma, delta_prime) by tail least squares. When the two
// regimes cannot both be met the best compromise is returned with both
// residual families reported.
std::vector<VoigtParams> solve_voigt(const ShellCouplings& sc,
                                     std::vector<VoigtParams> init,
                                     const SolverOptions& opts,
                                     VoigtSolveReport* report = nullptr);

// Profile evaluator: p(lambda) = G(dl'; sigma) L(dl; chi) / (e^S V(delta -
// delta_prime; sigma, chi)) with dl = lambda - center_a - delta and
// dl' = lambda - center_a - delta_prime. es_at is e^{S(lambda)}.
double eval_lg(double lambda, double center_a, const VoigtParams& vp,
               double es_at);

// Self-energy assembled from a family of profile shells in closed form:
//   Im = pi sum_t w2_t G_t L_t / V_t,
//   Re = sum_t w2_t [dl_t + chi_t dD_t] / (dl_t^2 + chi_t^2),
// the principal-value part evaluated through the Faddeeva-based dispersion
// identity; no gridded quadrature is involved.
Complex lg_self_energy_rhs(double lambda, const std::vector<double>& centers,
                           const std::vector<VoigtParams>& shells,
                           const std::vector<double>& coupling_sq);

// Boundary value of the effective self-energy ansatz (see the type).
Complex eff_self_energy(double lambda, const EffectiveSelfEnergy& e);

// Spectral density of the effective representation:
//   (1/pi) Im 1 / (lambda - a - delta_eff - Sigma(lambda)),
// which integrates to exactly 1 over the real line.
double eff_spectral_function(double lambda, double a,
                             const EffectiveSelfEnergy& e);

struct MatchReport {
  double position_residual = 0.0;  // |argmax f_eff - argmax f_V|
  double height_residual = 0.0;    // relative height mismatch at the peak
  bool in_validity_regime = true;  // |delta - delta_prime| <= chi
  int iterations = 0;
};

// Fixes (delta_eff, chi_eff) of the single-window effective self-energy so
// that its spectral function reproduces the exact peak position and height
// of the profile eval_lg(., a, vp, 1). The window anchor is the Gaussian
// center a + delta_prime and its width is sigma. Outside the validity regime
// the best-effort solution is returned with the report flag cleared.
EffectiveSelfEnergy match_effective(const VoigtParams& vp, double a,
                                    MatchReport* report = nullptr);

struct CausalityReport {
  double max_deviation = 0.0;         // from the subtraction constant
  double subtraction_constant = 0.0;  // mean of -Im F - H(Re F)
  std::vector<double> deviations;     // per grid point, constant removed
};

// Verifies the Kramers-Kronig closure of the window sum
// F(lambda) = sum_k chi_k w(-(lambda - c_k)/(sqrt2 sigma_k)):
// -Im F must equal H(Re F) up to the once-subtracted constant. The Hilbert
// side runs through sampled principal-value quadrature, making this an
// independent check on the Faddeeva path.
CausalityReport causality_check(const EffectiveSelfEnergy& e,
                                const std::vector<double>& grid);

}  // namespace specres
