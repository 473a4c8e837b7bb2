#include "specres/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace specres {

namespace {

void check_index(int idx, int dim, const char* who) {
  if (idx < 0 || idx >= dim)
    throw SizeError(std::string(who) + ": basis index out of range");
}

// Nearest eigenvalue to a real z, for pole diagnostics.
double nearest_level(const Eigen::VectorXd& lev, double x) {
  double best = lev[0];
  for (int n = 1; n < lev.size(); ++n)
    if (std::abs(lev[n] - x) < std::abs(best - x)) best = lev[n];
  return best;
}

}  // namespace

Spectrum diagonalize(const CoupledSystem& sys) {
  sys.validate();
  if (sys.dim > (1 << 14))
    throw SizeError("diagonalize: dim exceeds the dense solver bound");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sys.hamiltonian());
  if (solver.info() != Eigen::Success)
    throw ConvergenceError("diagonalize: eigensolver failed");
  Spectrum spec;
  spec.eigenvalues = solver.eigenvalues();
  spec.eigenvectors = solver.eigenvectors();
  return spec;
}

OverlapSet overlaps(const Spectrum& spec, int idx) {
  check_index(idx, spec.dim(), "overlaps");
  OverlapSet ov;
  ov.basis_index = idx;
  ov.p.resize(std::size_t(spec.dim()));
  for (int n = 0; n < spec.dim(); ++n) {
    const double amp = spec.eigenvectors(idx, n);
    ov.p[std::size_t(n)] = amp * amp;
  }
  return ov;
}

double default_window(const Spectrum& spec) {
  return 20.0 * spec.mean_spacing();
}

Complex resolvent_exact(const Spectrum& spec, int idx, Complex z) {
  check_index(idx, spec.dim(), "resolvent_exact");
  if (z.imag() == 0.0) {
    for (int n = 0; n < spec.dim(); ++n)
      if (z.real() == spec.eigenvalues[n])
        throw PoleError("resolvent_exact: z on an eigenvalue",
                        spec.eigenvalues[n]);
  }
  Complex acc = 0.0;
  for (int n = 0; n < spec.dim(); ++n) {
    const double p = spec.eigenvectors(idx, n) * spec.eigenvectors(idx, n);
    acc += p / (z - spec.eigenvalues[n]);
  }
  return acc;
}

ClosureSelfEnergy::ClosureSelfEnergy(const CoupledSystem& sys, int idx) {
  check_index(idx, sys.dim, "ClosureSelfEnergy");
  const int d = sys.dim - 1;
  Eigen::MatrixXd h = sys.hamiltonian();
  Eigen::VectorXd w(d);
  Eigen::MatrixXd hd(d, d);
  for (int j = 0, jj = 0; j < sys.dim; ++j) {
    if (j == idx) continue;
    w[jj] = sys.vcoupling(idx, j);
    for (int k = 0, kk = 0; k < sys.dim; ++k) {
      if (k == idx) continue;
      hd(jj, kk) = h(j, k);
      ++kk;
    }
    ++jj;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hd);
  if (solver.info() != Eigen::Success)
    throw ConvergenceError("ClosureSelfEnergy: eigensolver failed");
  mu_ = solver.eigenvalues();
  const Eigen::VectorXd amp = solver.eigenvectors().transpose() * w;
  q_ = amp.cwiseProduct(amp);
}

Complex ClosureSelfEnergy::operator()(Complex z) const {
  if (z.imag() == 0.0) {
    for (int k = 0; k < mu_.size(); ++k)
      if (z.real() == mu_[k])
        throw PoleError("ClosureSelfEnergy: z on a deleted-system level",
                        mu_[k]);
  }
  Complex acc = 0.0;
  for (int k = 0; k < mu_.size(); ++k) acc += q_[k] / (z - mu_[k]);
  return acc;
}

namespace {

struct SelfEnergySetup {
  Eigen::VectorXd w;        // coupling column idx
  Eigen::VectorXd q;        // |<psi_n|w>|^2
  Eigen::MatrixXd psi_sq;   // elementwise squared eigenvector matrix
  ClosureSelfEnergy closure;

  SelfEnergySetup(const CoupledSystem& sys, const Spectrum& spec, int idx)
      : closure(sys, idx) {
    w = sys.vcoupling.col(idx);
    const Eigen::VectorXd amp = spec.eigenvectors.transpose() * w;
    q = amp.cwiseProduct(amp);
    psi_sq = spec.eigenvectors.cwiseProduct(spec.eigenvectors);
  }

  SelfEnergySample eval(const CoupledSystem& sys, const Spectrum& spec,
                        int idx, Complex z) const {
    if (z.imag() == 0.0)
      throw PoleError("self_energy_exact: z must be off the real axis",
                      nearest_level(spec.eigenvalues, z.real()));
    const int dim = spec.dim();
    SelfEnergySample s;
    s.z = z;

    Eigen::VectorXcd denom(dim);
    for (int n = 0; n < dim; ++n) denom[n] = 1.0 / (z - spec.eigenvalues[n]);

    s.total = 0.0;
    for (int n = 0; n < dim; ++n) s.total += q[n] * denom[n];

    // Diagonal full-resolvent elements R_j(z) for every basis state.
    const Eigen::VectorXcd rdiag = psi_sq * denom;

    s.od = 0.0;
    for (int j = 0; j < dim; ++j) {
      if (j == idx) continue;
      s.od += w[j] * w[j] * rdiag[j];
    }
    s.cc = s.total - s.od;

    // Pair term: qv_a = V_{idx,a} R_a(z); the coupling diagonal is zero and
    // qv[idx] = 0, so the double sum skips the excluded indices by itself.
    Eigen::VectorXcd qv(dim);
    for (int a = 0; a < dim; ++a) qv[a] = w[a] * rdiag[a];
    s.third = qv.transpose() * (sys.vcoupling * qv);

    s.closure = closure(z);
    return s;
  }
};

}  // namespace

SelfEnergySample self_energy_exact(const CoupledSystem& sys,
                                   const Spectrum& spec, int idx, Complex z) {
  check_index(idx, sys.dim, "self_energy_exact");
  return SelfEnergySetup(sys, spec, idx).eval(sys, spec, idx, z);
}

std::vector<SelfEnergySample> self_energy_trace(
    const CoupledSystem& sys, const Spectrum& spec, int idx,
    const std::vector<Complex>& zs) {
  check_index(idx, sys.dim, "self_energy_trace");
  const SelfEnergySetup setup(sys, spec, idx);
  std::vector<SelfEnergySample> out;
  out.reserve(zs.size());
  for (const Complex z : zs) out.push_back(setup.eval(sys, spec, idx, z));
  return out;
}

GridFunction smooth_distribution(const OverlapSet& ov, const Spectrum& spec,
                                 double window) {
  std::vector<double> lev(spec.eigenvalues.data(),
                          spec.eigenvalues.data() + spec.dim());
  const EntropyEstimate ent = estimate_entropy(lev, window);

  std::vector<double> values;
  values.reserve(ent.lambdas.size());
  for (std::size_t c = 0; c < ent.lambdas.size(); ++c) {
    const double center = ent.lambdas[c];
    const auto first = std::lower_bound(lev.begin(), lev.end(),
                                        center - 0.5 * window);
    const auto last = std::lower_bound(lev.begin(), lev.end(),
                                       center + 0.5 * window);
    double shell_sum = 0.0;
    for (auto it = first; it != last; ++it)
      shell_sum += ov.p[std::size_t(it - lev.begin())];
    // e^S * window is exactly the shell count, so this is the in-shell mean.
    const double count = std::exp(ent.s_of_lambda[c]) * window;
    values.push_back(shell_sum / count);
  }
  return GridFunction(ent.lambdas, std::move(values));
}

ReconstructionReport verify_reconstruction(const CoupledSystem& sys,
                                           const Spectrum& spec, int idx,
                                           double window) {
  check_index(idx, sys.dim, "verify_reconstruction");
  if (window <= 0.0) window = default_window(spec);

  std::vector<double> lev(spec.eigenvalues.data(),
                          spec.eigenvalues.data() + spec.dim());
  const EntropyEstimate ent = estimate_entropy(lev, window);
  const OverlapSet exact = overlaps(spec, idx);
  const double p_scale =
      *std::max_element(exact.p.begin(), exact.p.end());

  const ClosureSelfEnergy g(sys, idx);
  const double a_shift = sys.a[idx] + sys.vdiag[idx];

  auto reconstruct = [&](double eta) {
    std::vector<double> p(std::size_t(spec.dim()));
    double norm = 0.0;
    for (int n = 0; n < spec.dim(); ++n) {
      const double ln = spec.eigenvalues[n];
      const Complex gz = g(Complex(ln, -eta));
      const double num = gz.imag() + eta;
      const double dr = ln - a_shift - gz.real();
      const double raw =
          num / ((dr * dr + num * num) * kPi * ent.e_s_at(ln));
      p[std::size_t(n)] = raw;
      norm += raw;
    }
    for (auto& v : p) v /= norm;
    return p;
  };
  auto deviation = [&](const std::vector<double>& p) {
    double worst = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n)
      worst = std::max(worst, std::abs(p[n] - exact.p[n]));
    return worst / p_scale;
  };

  ReconstructionReport rep;
  const double spacing = spec.mean_spacing();
  for (const double mult : {4.0, 2.0, 1.0, 0.5}) {
    rep.etas.push_back(mult * spacing);
    rep.deviations.push_back(deviation(reconstruct(mult * spacing)));
  }
  rep.headline_eta = 1e-6 * spec.span();
  rep.p_reconstructed = reconstruct(rep.headline_eta);
  rep.headline_deviation = deviation(rep.p_reconstructed);
  return rep;
}

double im_g_coherent(const CoupledSystem& sys, const Spectrum& spec, int idx,
                     int n, const EntropyEstimate& entropy) {
  check_index(idx, sys.dim, "im_g_coherent");
  check_index(n, spec.dim(), "im_g_coherent");
  const double amp = sys.vcoupling.col(idx).dot(spec.eigenvectors.col(n));
  return amp * amp * entropy.e_s_at(spec.eigenvalues[n]);
}

double im_g_coherent(const CoupledSystem& sys, const Spectrum& spec, int idx,
                     int n) {
  std::vector<double> lev(spec.eigenvalues.data(),
                          spec.eigenvalues.data() + spec.dim());
  return im_g_coherent(sys, spec, idx, n,
                       estimate_entropy(lev, default_window(spec)));
}

}  // namespace specres
