#include "specres/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace specres {

Eigen::MatrixXd CoupledSystem::hamiltonian() const {
  Eigen::MatrixXd h = vcoupling;
  h.diagonal() += a + vdiag;
  return h;
}

void CoupledSystem::validate() const {
  if (dim <= 0) throw ShapeError("CoupledSystem: dim must be positive");
  if (a.size() != dim || vdiag.size() != dim)
    throw ShapeError("CoupledSystem: array length != dim");
  if (vcoupling.rows() != dim || vcoupling.cols() != dim)
    throw ShapeError("CoupledSystem: coupling matrix is not dim x dim");
  if ((vcoupling - vcoupling.transpose()).cwiseAbs().maxCoeff() != 0.0)
    throw DomainError("CoupledSystem: coupling must be exactly symmetric");
  if (vcoupling.diagonal().cwiseAbs().maxCoeff() != 0.0)
    throw DomainError("CoupledSystem: coupling diagonal must be zero");
  for (int i = 1; i < dim; ++i)
    if (a[i] < a[i - 1])
      throw DomainError("CoupledSystem: a must be sorted ascending");
}

namespace {

// Applies one permutation to the basis labels of a system in place.
void permute_basis(CoupledSystem& sys, const std::vector<int>& perm) {
  const int d = sys.dim;
  Eigen::VectorXd a2(d), vd2(d);
  Eigen::MatrixXd vc2(d, d);
  for (int i = 0; i < d; ++i) {
    a2[i] = sys.a[perm[std::size_t(i)]];
    vd2[i] = sys.vdiag[perm[std::size_t(i)]];
  }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      vc2(i, j) = sys.vcoupling(perm[std::size_t(i)], perm[std::size_t(j)]);
  sys.a = std::move(a2);
  sys.vdiag = std::move(vd2);
  sys.vcoupling = std::move(vc2);
}

void sort_basis_canonical(CoupledSystem& sys) {
  std::vector<int> perm(std::size_t(sys.dim));
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](int l, int r) { return sys.a[l] < sys.a[r]; });
  permute_basis(sys, perm);
}

}  // namespace

CoupledSystem build_ising_chain(int n_sites, double j_zz, double h_z,
                                double g_x) {
  if (n_sites < 2 || n_sites > 14)
    throw SizeError("build_ising_chain: n_sites must be in [2, 14]");
  const int dim = 1 << n_sites;

  CoupledSystem sys;
  sys.dim = dim;
  sys.a.resize(dim);
  sys.vdiag = Eigen::VectorXd::Zero(dim);
  sys.vcoupling = Eigen::MatrixXd::Zero(dim, dim);
  sys.label = "ising-n" + std::to_string(n_sites);

  auto spin = [](int state, int site) {
    return ((state >> site) & 1) ? 1.0 : -1.0;
  };
  for (int b = 0; b < dim; ++b) {
    double e = 0.0;
    for (int i = 0; i + 1 < n_sites; ++i)
      e += j_zz * spin(b, i) * spin(b, i + 1);
    for (int i = 0; i < n_sites; ++i) e += h_z * spin(b, i);
    sys.a[b] = e;
  }
  for (int b = 0; b < dim; ++b) {
    for (int i = 0; i < n_sites; ++i) {
      const int flipped = b ^ (1 << i);
      sys.vcoupling(b, flipped) = g_x;
    }
  }

  sort_basis_canonical(sys);
  sys.validate();
  return sys;
}

namespace {

// Deterministic standard normal: Box-Muller on the raw engine, so the draw
// sequence does not depend on the standard library's distribution internals.
class NormalDraw {
 public:
  explicit NormalDraw(long seed) : eng_(std::uint64_t(seed)) {}
  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }
  // Uniform on (0, 1].
  double uniform_open() {
    return (double(eng_()) + 1.0) * 0x1p-64;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace

CoupledSystem build_banded_ensemble(int dim, const EnsembleProfile& profile) {
  if (dim < 4) throw SizeError("build_banded_ensemble: dim must be >= 4");

  // Level density consistency: the entropy table must integrate to dim.
  const auto& s = profile.entropy;
  std::vector<double> es(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) es[i] = std::exp(s.values[i]);
  const GridFunction density(s.lambdas, es);
  const double mass = density.integral();
  if (std::abs(mass - double(dim)) > 0.05 * double(dim))
    throw ConfigError("build_banded_ensemble: exp(S) mass " +
                      std::to_string(mass) + " is inconsistent with dim " +
                      std::to_string(dim));

  NormalDraw rng(profile.seed);

  // Energies by inverse-CDF sampling of the level density, then sorted.
  const std::size_t fine_n = 4096;
  auto fine = linspace(s.front(), s.back(), fine_n);
  std::vector<double> cdf(fine_n, 0.0);
  for (std::size_t i = 1; i < fine_n; ++i) {
    cdf[i] = cdf[i - 1] + 0.5 *
                              (density.value_at(fine[i]) +
                               density.value_at(fine[i - 1])) *
                              (fine[i] - fine[i - 1]);
  }
  std::vector<double> energies(static_cast<std::size_t>(dim), 0.0);
  for (auto& e : energies) {
    const double target = rng.uniform_open() * cdf.back();
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    const std::size_t hi = std::min<std::size_t>(
        std::max<std::size_t>(std::size_t(it - cdf.begin()), 1), fine_n - 1);
    const double t = (target - cdf[hi - 1]) /
                     std::max(cdf[hi] - cdf[hi - 1], 1e-300);
    e = fine[hi - 1] + t * (fine[hi] - fine[hi - 1]);
  }
  std::sort(energies.begin(), energies.end());

  CoupledSystem sys;
  sys.dim = dim;
  sys.seed = profile.seed;
  sys.label = "ensemble-d" + std::to_string(dim);
  sys.a = Eigen::Map<Eigen::VectorXd>(energies.data(), dim);
  sys.vdiag = Eigen::VectorXd::Zero(dim);
  sys.vcoupling = Eigen::MatrixXd::Zero(dim, dim);

  // Upper triangle row-major, mirrored; variance exp(-S) f2 at the pair's
  // mean energy and difference.
  for (int mu = 0; mu < dim; ++mu) {
    for (int nu = mu + 1; nu < dim; ++nu) {
      const double eps_plus = 0.5 * (sys.a[mu] + sys.a[nu]);
      const double delta = sys.a[mu] - sys.a[nu];
      const double f2 = profile.bandwidth_fn(eps_plus, delta);
      if (!(f2 >= 0.0))
        throw DomainError("build_banded_ensemble: bandwidth_fn < 0");
      const double sdev = std::sqrt(std::exp(-s.value_at(eps_plus)) * f2);
      const double v = sdev * rng();
      sys.vcoupling(mu, nu) = v;
      sys.vcoupling(nu, mu) = v;
    }
  }

  sys.validate();
  return sys;
}

EnsembleProfile flat_profile(int dim, double center, double width, double f2,
                             long seed) {
  if (!(width > 0.0)) throw DomainError("flat_profile: width must be > 0");
  const double s_const = std::log(double(dim) / width);
  EnsembleProfile p;
  p.entropy = GridFunction(linspace(center - 0.5 * width, center + 0.5 * width,
                                    33),
                           std::vector<double>(33, s_const));
  p.bandwidth_fn = [f2](double, double) { return f2; };
  p.seed = seed;
  return p;
}

double EntropyEstimate::s_at(double lambda) const {
  if (lambdas.empty()) throw SizeError("EntropyEstimate: empty");
  if (lambda < lambdas.front() || lambda > lambdas.back())
    throw DomainError("EntropyEstimate: lambda outside reported hull");
  const auto it =
      std::upper_bound(lambdas.begin(), lambdas.end(), lambda);
  const std::size_t hi =
      std::min<std::size_t>(std::size_t(it - lambdas.begin()), lambdas.size() - 1);
  if (hi == 0) return s_of_lambda.front();
  const double t =
      (lambda - lambdas[hi - 1]) / (lambdas[hi] - lambdas[hi - 1]);
  return s_of_lambda[hi - 1] + t * (s_of_lambda[hi] - s_of_lambda[hi - 1]);
}

double EntropyEstimate::e_s_at(double lambda) const {
  if (lambdas.empty() || lambda < lambdas.front() || lambda > lambdas.back())
    return 0.0;
  return std::exp(s_at(lambda));
}

EntropyEstimate estimate_entropy(const std::vector<double>& eigenvalues,
                                 double window) {
  if (eigenvalues.size() < 2)
    throw SizeError("estimate_entropy: need at least 2 eigenvalues");
  std::vector<double> lev = eigenvalues;
  std::sort(lev.begin(), lev.end());
  const double lo = lev.front(), hi = lev.back();
  const double mean_spacing = (hi - lo) / double(lev.size() - 1);
  if (!(window > mean_spacing))
    throw DomainError("estimate_entropy: window must exceed the mean level spacing");

  // Overlapping shells: centers step exactly window/2 so that any interior
  // point mass is covered by exactly two shells. The last center may overhang
  // the top of the spectrum by less than half a step; its shell still holds
  // the topmost level.
  const double halfw = 0.5 * window;
  const auto n_steps =
      std::max<std::size_t>(1, std::size_t(std::ceil((hi - lo) / halfw - 1e-9)));
  std::vector<double> centers(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) centers[k] = lo + double(k) * halfw;

  EntropyEstimate est;
  est.window = window;
  for (const double c : centers) {
    // Half-open shell [c - w/2, c + w/2).
    const auto first = std::lower_bound(lev.begin(), lev.end(), c - 0.5 * window);
    const auto last = std::lower_bound(lev.begin(), lev.end(), c + 0.5 * window);
    const auto count = last - first;
    if (count <= 0) continue;  // excluded, not zero
    est.lambdas.push_back(c);
    est.s_of_lambda.push_back(std::log(double(count) / window));
  }
  return est;
}

}  // namespace specres
