#include "specres/ansatz.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "specres/hilbert.hpp"
#include "specres/optimize.hpp"
#include "specres/specfun.hpp"

namespace specres {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;

double row_sum(const Eigen::MatrixXd& w2, std::size_t s) {
  double acc = 0.0;
  for (Eigen::Index t = 0; t < w2.cols(); ++t) acc += w2(Eigen::Index(s), t);
  return acc;
}

// Tail abscissas for a shell at c: |lambda - c| in [lo, hi] on both sides,
// clipped to the hull. A side whose clipped span falls below min_span is
// dropped. Callers pass min_span = 0 once lo already clears the crossover
// zone: even a short flank pins the fitted vertex, and dropping it lets the
// whole shifted-center field drift sideways in lockstep.
std::vector<double> tail_points(double c, double lo, double hi, double hull_lo,
                                double hull_hi, int per_side, double min_span) {
  std::vector<double> pts;
  const auto add_side = [&](double from, double to) {
    if (to - from < min_span) return;
    for (int k = 0; k < per_side; ++k)
      pts.push_back(from + (to - from) * (double(k) + 0.5) / double(per_side));
  };
  add_side(std::max(c + lo, hull_lo), std::min(c + hi, hull_hi));   // right
  add_side(std::max(c - hi, hull_lo), std::min(c - lo, hull_hi));   // left
  std::sort(pts.begin(), pts.end());
  return pts;
}

// Least-squares parabola y ~ a x^2 + b x + g, centered for conditioning.
void quad_fit(const std::vector<double>& xs, const std::vector<double>& ys,
              double* a, double* b, double* g) {
  const std::size_t n = xs.size();
  double mx = 0.0;
  for (const double x : xs) mx += x / double(n);
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    const double x = xs[k] - mx;
    const Eigen::Vector3d row(x * x, x, 1.0);
    m += row * row.transpose();
    r += row * ys[k];
  }
  const Eigen::Vector3d c = m.fullPivLu().solve(r);
  *a = c[0];
  *b = c[1] - 2.0 * c[0] * mx;
  *g = c[2] - c[1] * mx + c[0] * mx * mx;
}

struct TailFit {
  double sigma;
  double m;        // absolute envelope center (c + delta_prime)
  double misfit;   // rms log-space residual over the tail points
};

// Box constraints for the tail fits. The Gaussian envelope of a coupling
// profile has to live inside the spectral hull and on scales between a bin
// and a couple of hull widths; without the box a one-sided grid admits an
// exponential-flank runaway (sigma -> inf, m -> -inf at fixed m / sigma^2).
// m_anchor / m_scale add a weak vertex prior: a one-sided grid leaves a soft
// valley in m along which the data barely changes, and without an anchor the
// vertex walks to the box edge instead of staying where the shell sits.
struct TailBox {
  double sigma_lo, sigma_hi, m_lo, m_hi;
  double m_anchor, m_scale;
};

// Prior weight in squared log-residual units: negligible against the data
// term whenever both flanks are sampled, decisive along a one-sided valley.
constexpr double kVertexPrior = 4e-4;

// Fits -(lambda - m)^2 / (2 sigma^2) + offset_fn(sigma, m) to y(lambda) in
// least squares. offset_fn carries the sigma-dependent normalization of the
// particular solver (plain Gaussian or Voigt-normalized). When free_level is
// set an additive constant is profiled out in closed form, so only the shape
// of the data constrains (sigma, m); the level of the schematic tail relation
// carries no information in that mode.
// fix_m pins the vertex at m_seed and fits the width alone. Required when
// the grid covers only one flank: there the detuning factor's residual slope
// is indistinguishable from a center shift and the fitted vertex would walk
// off, so the envelope stays centered on its shell by convention.
template <typename OffsetFn>
TailFit fit_log_gaussian(const std::vector<double>& xs,
                         const std::vector<double>& ys, double sigma_seed,
                         double m_seed, OffsetFn&& offset, bool free_level,
                         bool fix_m, const TailBox& box) {
  const auto residual_rms = [&](double sg, double m) {
    const double off = offset(sg, m);
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double d = xs[k] - m;
      const double e = -d * d / (2.0 * sg * sg) + off - ys[k];
      sum += e;
      sumsq += e * e;
    }
    const double nn = double(xs.size());
    if (free_level) return std::sqrt(std::max(0.0, sumsq / nn - (sum / nn) * (sum / nn)));
    return std::sqrt(sumsq / nn);
  };
  const auto objective = [&](const std::vector<double>& u) {
    const double sg = std::exp(u[0]);
    if (sg < box.sigma_lo || sg > box.sigma_hi || u[1] < box.m_lo ||
        u[1] > box.m_hi)
      return 1e100;
    const double r = residual_rms(sg, u[1]);
    const double t = (u[1] - box.m_anchor) / box.m_scale;
    return r * r + kVertexPrior * t * t;
  };
  const double s0 = std::clamp(sigma_seed, box.sigma_lo, box.sigma_hi);
  const double m0 = fix_m ? m_seed : std::clamp(m_seed, box.m_lo, box.m_hi);
  // Second pass restarts from the first optimum with a small fresh simplex:
  // a contracted simplex can stall short of the minimum, and the restart
  // keeps the fit noise well below the outer fixed-point tolerance.
  SimplexResult res;
  if (fix_m) {
    const auto width_only = [&](const std::vector<double>& u) {
      return objective({u[0], m0});
    };
    res = nelder_mead(width_only, {std::log(s0)}, {0.2});
    res = nelder_mead(width_only, res.x, {1e-4});
    res.x.push_back(m0);
  } else {
    res = nelder_mead(objective, {std::log(s0), m0}, {0.2, 0.25 * s0});
    res = nelder_mead(objective, res.x, {1e-4, 1e-4 * s0});
  }
  TailFit fit{std::exp(res.x[0]), res.x[1], 0.0};
  fit.misfit = residual_rms(fit.sigma, fit.m);
  return fit;
}

}  // namespace

void VoigtParams::validate() const {
  if (!(chi > 0.0)) throw DomainError("VoigtParams: chi must be > 0");
  if (!(sigma > 0.0)) throw DomainError("VoigtParams: sigma must be > 0");
  if (!(voigt(delta - delta_prime, ProfileParams(sigma, chi)) > 0.0))
    throw DomainError("VoigtParams: normalization underflows");
}

void EffectiveSelfEnergy::validate() const {
  if (!(chi_eff > 0.0))
    throw DomainError("EffectiveSelfEnergy: chi_eff must be > 0");
  if (!(sigma > 0.0)) throw DomainError("EffectiveSelfEnergy: sigma must be > 0");
  if (has_second) {
    if (!(chi2 > 0.0))
      throw DomainError("EffectiveSelfEnergy: chi2 must be > 0");
    if (!(sigma2 > 0.0))
      throw DomainError("EffectiveSelfEnergy: sigma2 must be > 0");
  }
}

void ShellCouplings::validate() const {
  const auto n = centers.size();
  if (n < 2) throw SizeError("ShellCouplings: need at least 2 shells");
  if (vdiag.size() != n)
    throw ShapeError("ShellCouplings: vdiag length != centers length");
  if (w2.rows() != Eigen::Index(n) || w2.cols() != Eigen::Index(n))
    throw ShapeError("ShellCouplings: weight matrix is not n x n");
  for (std::size_t s = 1; s < n; ++s)
    if (!(centers[s] > centers[s - 1]))
      throw DomainError("ShellCouplings: centers must be strictly ascending");
  for (Eigen::Index s = 0; s < w2.rows(); ++s)
    for (Eigen::Index t = 0; t < w2.cols(); ++t)
      if (w2(s, t) < 0.0)
        throw DomainError("ShellCouplings: negative coupling weight");
}

ShellCouplings reduce_to_shells(const EnsembleProfile& profile, int n_shells) {
  if (n_shells < 2)
    throw ConfigError("reduce_to_shells: need at least 2 shells");
  if (profile.entropy.size() < 2)
    throw ConfigError("reduce_to_shells: entropy profile too short");
  const double lo = profile.entropy.front();
  const double hi = profile.entropy.back();
  const double bin = (hi - lo) / double(n_shells);

  ShellCouplings sc;
  sc.centers.resize(std::size_t(n_shells));
  sc.vdiag.assign(std::size_t(n_shells), 0.0);
  std::vector<double> counts(std::size_t(n_shells), 0.0);
  for (int s = 0; s < n_shells; ++s) {
    sc.centers[std::size_t(s)] = lo + (double(s) + 0.5) * bin;
    counts[std::size_t(s)] =
        std::exp(profile.entropy.value_at(sc.centers[std::size_t(s)])) * bin;
  }
  sc.w2 = Eigen::MatrixXd::Zero(n_shells, n_shells);
  for (int s = 0; s < n_shells; ++s)
    for (int t = 0; t < n_shells; ++t) {
      const double mid =
          0.5 * (sc.centers[std::size_t(s)] + sc.centers[std::size_t(t)]);
      const double delta =
          sc.centers[std::size_t(s)] - sc.centers[std::size_t(t)];
      const double f2 = profile.bandwidth_fn(mid, delta);
      if (f2 < 0.0) throw DomainError("reduce_to_shells: negative bandwidth");
      sc.w2(s, t) =
          counts[std::size_t(t)] * std::exp(-profile.entropy.value_at(mid)) * f2;
    }
  return sc;
}

ShellCouplings shells_from_system(const CoupledSystem& sys) {
  sys.validate();
  ShellCouplings sc;
  sc.centers.assign(sys.a.data(), sys.a.data() + sys.dim);
  sc.vdiag.assign(sys.vdiag.data(), sys.vdiag.data() + sys.dim);
  sc.w2 = sys.vcoupling.array().square();
  return sc;
}

namespace {

// One application of the width/shift map at fixed matching points; used both
// by the damped iteration and as the Newton residual.
struct LorentzMap {
  const ShellCouplings& sc;
  const MatchingRule& rule;

  double matching(std::size_t s, const std::vector<double>& delta) const {
    switch (rule.kind) {
      case MatchingRule::Kind::center:
        return sc.centers[s];
      case MatchingRule::Kind::fixed:
        return rule.lambdas[s];
      case MatchingRule::Kind::peak:
      default:
        return sc.centers[s] + delta[s];
    }
  }

  void apply(const std::vector<double>& chi, const std::vector<double>& delta,
             std::vector<double>* chi_out, std::vector<double>* delta_out) const {
    const std::size_t n = sc.size();
    for (std::size_t s = 0; s < n; ++s) {
      const double lam = matching(s, delta);
      double sc_chi = 0.0, sc_delta = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double w = sc.w2(Eigen::Index(s), Eigen::Index(t));
        if (w == 0.0) continue;
        const double d = lam - sc.centers[t] - delta[t];
        const double den = d * d + chi[t] * chi[t];
        sc_chi += w * chi[t] / den;
        sc_delta += w * d / den;
      }
      (*chi_out)[s] = sc_chi;
      (*delta_out)[s] = sc.vdiag[s] + sc_delta;
    }
  }

  double residual(const std::vector<double>& chi,
                  const std::vector<double>& delta) const {
    const std::size_t n = sc.size();
    std::vector<double> c(n), d(n);
    apply(chi, delta, &c, &d);
    double r = 0.0;
    for (std::size_t s = 0; s < n; ++s)
      r = std::max(r, std::max(std::abs(c[s] - chi[s]), std::abs(d[s] - delta[s])));
    return r;
  }
};

// Damped Newton on the fixed-point residual in (log chi, delta) coordinates.
// The width equation always admits the spurious solution chi -> 0 (both
// sides vanish); in log coordinates that family is no longer a root, so
// Newton can only land on genuine positive-width fixed points. Convergence
// is judged by the plain-coordinate residual.
bool lorentz_newton(const LorentzMap& map, std::vector<double>* chi,
                    std::vector<double>* delta, double tol, int max_iter) {
  const std::size_t n = chi->size();
  std::vector<double> c(n), d(n), mc(n), md(n);
  const auto pack_residual = [&](const std::vector<double>& x,
                                 Eigen::VectorXd* f) {
    for (std::size_t s = 0; s < n; ++s) {
      c[s] = std::exp(x[s]);
      d[s] = x[n + s];
    }
    map.apply(c, d, &mc, &md);
    for (std::size_t s = 0; s < n; ++s) {
      (*f)[Eigen::Index(s)] = x[s] - std::log(mc[s]);
      (*f)[Eigen::Index(n + s)] = d[s] - md[s];
    }
  };
  const auto plain_residual = [&](const std::vector<double>& x) {
    for (std::size_t s = 0; s < n; ++s) {
      c[s] = std::exp(x[s]);
      d[s] = x[n + s];
    }
    return map.residual(c, d);
  };

  std::vector<double> x(2 * n);
  for (std::size_t s = 0; s < n; ++s) {
    x[s] = std::log((*chi)[s]);
    x[n + s] = (*delta)[s];
  }

  Eigen::VectorXd f(2 * n), ft(2 * n);
  pack_residual(x, &f);
  bool done = false;
  for (int it = 0; it < max_iter && !done; ++it) {
    Eigen::MatrixXd jac(2 * n, 2 * n);
    for (std::size_t k = 0; k < 2 * n; ++k) {
      const double h = 1e-7 * (1.0 + std::abs(x[k]));
      auto xp = x;
      xp[k] += h;
      pack_residual(xp, &ft);
      jac.col(Eigen::Index(k)) = (ft - f) / h;
    }
    const Eigen::VectorXd step = jac.fullPivLu().solve(-f);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      auto xt = x;
      for (std::size_t k = 0; k < 2 * n; ++k) xt[k] += t * step[Eigen::Index(k)];
      pack_residual(xt, &ft);
      if (ft.lpNorm<Eigen::Infinity>() < f.lpNorm<Eigen::Infinity>()) {
        x = xt;
        f = ft;
        accepted = true;
        break;
      }
    }
    done = plain_residual(x) <= tol;
    if (!accepted && !done) break;
  }
  const bool ok = plain_residual(x) <= tol;
  for (std::size_t s = 0; s < n; ++s) {
    (*chi)[s] = std::exp(x[s]);
    (*delta)[s] = x[n + s];
  }
  return ok;
}

}  // namespace

std::vector<LorentzParams> solve_lorentz(const ShellCouplings& sc,
                                         const MatchingRule& rule,
                                         const SolverOptions& opts,
                                         AnsatzSolveReport* report) {
  sc.validate();
  opts.validate();
  const std::size_t n = sc.size();
  if (rule.kind == MatchingRule::Kind::fixed && rule.lambdas.size() != n)
    throw ShapeError("solve_lorentz: one fixed matching point per shell required");
  const double span = sc.centers.back() - sc.centers.front();

  std::vector<double> chi(n), delta(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double g = row_sum(sc.w2, s);
    if (!(g > 0.0))
      throw DegenerateError("solve_lorentz: shell " + std::to_string(s) +
                            " is uncoupled; its width collapses to zero");
    chi[s] = std::sqrt(g);
    delta[s] = sc.vdiag[s];
  }

  const LorentzMap map{sc, rule};
  AnsatzSolveReport rep;
  std::vector<double> mc(n), md(n);
  std::vector<double> best_chi = chi, best_delta = delta;
  double best_r = std::numeric_limits<double>::infinity();

  for (int it = 0; it < opts.max_iter; ++it) {
    map.apply(chi, delta, &mc, &md);
    double r = 0.0;
    for (std::size_t s = 0; s < n; ++s)
      r = std::max(r, std::max(std::abs(mc[s] - chi[s]), std::abs(md[s] - delta[s])));
    rep.history.push_back(r);
    rep.iterations = it + 1;
    if (r < best_r) {
      best_r = r;
      best_chi = chi;
      best_delta = delta;
    }
    if (r <= opts.tol) {
      rep.converged = true;
      break;
    }
    for (std::size_t s = 0; s < n; ++s) {
      chi[s] += opts.damping * (mc[s] - chi[s]);
      delta[s] += opts.damping * (md[s] - delta[s]);
    }
  }

  const double collapse = 1e-10 * std::max(span, 1e-6);
  const auto collapsed = [&](const std::vector<double>& c) {
    return *std::min_element(c.begin(), c.end()) <= collapse;
  };

  // The plain iteration can converge onto the spurious chi -> 0 family (both
  // sides of the width equation vanish there) or fail outright when the
  // genuine fixed point is repulsive. Log-coordinate Newton from the fresh
  // seed, then from the best iterate, recovers the positive-width root when
  // one exists.
  if (rep.converged && collapsed(chi)) rep.converged = false;
  if (!rep.converged) {
    std::vector<double> nc(n), nd(n);
    for (std::size_t s = 0; s < n; ++s) {
      nc[s] = std::sqrt(row_sum(sc.w2, s));
      nd[s] = sc.vdiag[s];
    }
    if (lorentz_newton(map, &nc, &nd, opts.tol, 60) && !collapsed(nc)) {
      chi = nc;
      delta = nd;
      rep.converged = true;
    } else {
      nc = best_chi;
      nd = best_delta;
      if (lorentz_newton(map, &nc, &nd, opts.tol, 60) && !collapsed(nc)) {
        chi = nc;
        delta = nd;
        rep.converged = true;
      }
    }
    if (rep.converged) {
      rep.diagnostic = "fixed point reached through the Newton fallback";
    } else {
      chi = best_chi;
      delta = best_delta;
    }
  }

  rep.residual = map.residual(chi, delta);
  if (collapsed(chi))
    throw DegenerateError(
        "solve_lorentz: width collapsed to zero; no positive-width fixed "
        "point found");
  if (!rep.converged) {
    rep.diagnostic = "no fixed point within max_iter (residual " +
                     std::to_string(rep.residual) + ")";
    if (!report) throw ConvergenceError("solve_lorentz: " + rep.diagnostic);
  }
  if (report) *report = std::move(rep);

  std::vector<LorentzParams> out(n);
  for (std::size_t s = 0; s < n; ++s) out[s] = {chi[s], delta[s]};
  return out;
}

std::vector<GaussParams> solve_gauss_tail(const ShellCouplings& sc,
                                          const std::vector<LorentzParams>& bulk,
                                          const SolverOptions& opts,
                                          AnsatzSolveReport* report) {
  sc.validate();
  opts.validate();
  const std::size_t n = sc.size();
  if (bulk.size() != n)
    throw ShapeError("solve_gauss_tail: one bulk parameter set per shell required");
  const double hull_lo = sc.centers.front();
  const double hull_hi = sc.centers.back();

  // Frozen per-shell tail grids: extent from the coupling bandwidth second
  // moment, inner edge from the bulk width.
  std::vector<std::vector<double>> grids(n);
  std::vector<double> sigma(n), m(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double g = row_sum(sc.w2, s);
    if (!(g > 0.0))
      throw DegenerateError("solve_gauss_tail: shell " + std::to_string(s) +
                            " is uncoupled");
    double m2 = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double d = sc.centers[t] - sc.centers[s];
      m2 += sc.w2(Eigen::Index(s), Eigen::Index(t)) * d * d;
    }
    const double bin = (hull_hi - hull_lo) / double(n - 1);
    sigma[s] = std::max(std::sqrt(m2 / g), bin);
    m[s] = sc.centers[s];
    // The inner edge has to clear both the Lorentzian core (3 chi) and the
    // core of the Gaussian envelope itself: below ~2 sigma the detuning
    // factor still dominates the shape and the tail relation is not in its
    // regime yet.
    grids[s] = tail_points(sc.centers[s],
                           std::max(3.0 * bulk[s].chi, 2.0 * sigma[s]),
                           6.0 * sigma[s], hull_lo, hull_hi, 12, 0.0);
  }
  // Shells without a usable tail window or without Gaussian decay in their
  // window keep the seed estimate instead of entering the fit; only when no
  // shell at all qualifies is the ensemble outside the tail regime.
  std::vector<char> frozen(n, 0);
  for (std::size_t s = 0; s < n; ++s)
    if (grids[s].size() < 5) frozen[s] = 1;
  std::vector<char> one_sided(n, 0);
  for (std::size_t s = 0; s < n; ++s)
    if (!frozen[s])
      one_sided[s] = grids[s].front() > sc.centers[s] ||
                     grids[s].back() < sc.centers[s];

  AnsatzSolveReport rep;
  std::vector<double> ys;
  std::vector<double> xs;
  std::vector<double> sigma_new(n), m_new(n), misfit(n, 0.0);

  std::vector<double> lnrhs;
  for (int sweep = 0; sweep < opts.max_iter; ++sweep) {
    for (std::size_t s = 0; s < n; ++s) {
      if (frozen[s]) {
        sigma_new[s] = sigma[s];
        m_new[s] = m[s];
        continue;
      }
      xs.clear();
      ys.clear();
      lnrhs.clear();
      for (const double lam : grids[s]) {
        double rhs = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
          const double w = sc.w2(Eigen::Index(s), Eigen::Index(t));
          if (w == 0.0) continue;
          rhs += w * gaussian(lam - m[t], sigma[t]);
        }
        const double dl = lam - sc.centers[s] - sc.vdiag[s];
        if (rhs < 1e-280 || std::abs(dl) < 1e-12) continue;
        xs.push_back(lam);
        lnrhs.push_back(std::log(rhs));
        ys.push_back(std::log(rhs) - 2.0 * std::log(std::abs(dl)));
      }
      if (xs.size() < 5) {
        frozen[s] = 1;
        sigma_new[s] = sigma[s];
        m_new[s] = m[s];
        misfit[s] = 0.0;
        continue;
      }

      // Gate on the coupling sum alone: the 1/Delta^2 factor is known
      // exactly and must not enter the decay test. A flat bandwidth profile
      // leaves the sum without curvature and has no tail regime. The gate is
      // applied on the seed configuration of the first sweep.
      const double hull_w = sc.centers.back() - sc.centers.front();
      double qa, qb, qg;
      quad_fit(xs, lnrhs, &qa, &qb, &qg);
      if (sweep == 0 &&
          (!(qa < 0.0) || std::sqrt(-0.5 / qa) > 2.0 * hull_w)) {
        frozen[s] = 1;
        sigma_new[s] = sigma[s];
        m_new[s] = m[s];
        continue;
      }
      const double m_seed =
          qa < 0.0 ? -qb / (2.0 * qa) : sc.centers[s];
      const double bin = hull_w / double(n - 1);
      const TailBox box{0.25 * bin,         2.0 * hull_w,
                        sc.centers.front(), sc.centers.back(),
                        sc.centers[s],      sigma[s]};
      const auto fit = fit_log_gaussian(
          xs, ys, sigma[s], one_sided[s] ? sc.centers[s] : m_seed,
          [](double sg, double) { return -std::log(kSqrt2Pi * sg); },
          /*free_level=*/true, /*fix_m=*/one_sided[s] != 0, box);
      sigma_new[s] = fit.sigma;
      m_new[s] = fit.m;
      misfit[s] = fit.misfit;
    }

    if (sweep == 0) {
      const std::size_t nfrozen =
          std::size_t(std::count(frozen.begin(), frozen.end(), char(1)));
      if (nfrozen == n)
        throw TailRegimeError(
            "solve_gauss_tail: no shell shows Gaussian decay in its tail "
            "window");
      if (nfrozen > 0)
        rep.diagnostic = std::to_string(nfrozen) + " of " +
                         std::to_string(n) +
                         " shells kept their seed tail estimate (no usable "
                         "decay window)";
    }

    double r = 0.0;
    for (std::size_t s = 0; s < n; ++s)
      r = std::max(r, std::max(std::abs(sigma_new[s] - sigma[s]),
                               std::abs(m_new[s] - m[s])));
    rep.history.push_back(r);
    rep.iterations = sweep + 1;
    for (std::size_t s = 0; s < n; ++s) {
      sigma[s] = std::exp(std::log(sigma[s]) +
                          opts.damping * (std::log(sigma_new[s]) - std::log(sigma[s])));
      m[s] += opts.damping * (m_new[s] - m[s]);
    }
    if (r <= opts.tol) {
      rep.converged = true;
      break;
    }
  }

  rep.residual = rep.history.empty() ? 0.0 : rep.history.back();
  rep.misfit = *std::max_element(misfit.begin(), misfit.end());
  if (!rep.converged) {
    if (!rep.diagnostic.empty()) rep.diagnostic += "; ";
    rep.diagnostic += "tail parameters still moving after max_iter (residual " +
                      std::to_string(rep.residual) + ")";
    if (!report) throw ConvergenceError("solve_gauss_tail: " + rep.diagnostic);
  }
  if (report) *report = std::move(rep);

  std::vector<GaussParams> out(n);
  for (std::size_t s = 0; s < n; ++s) out[s] = {sigma[s], m[s] - sc.centers[s]};
  return out;
}

double eval_lg(double lambda, double center_a, const VoigtParams& vp,
               double es_at) {
  if (!(es_at > 0.0)) throw DomainError("eval_lg: e^S must be positive");
  const ProfileParams p(vp.sigma, vp.chi);
  const double v0 = voigt(vp.delta - vp.delta_prime, p);
  if (!(v0 > 0.0)) throw DomainError("eval_lg: normalization underflows");
  return gaussian(lambda - center_a - vp.delta_prime, vp.sigma) *
         lorentzian(lambda - center_a - vp.delta, vp.chi) / (es_at * v0);
}

Complex lg_self_energy_rhs(double lambda, const std::vector<double>& centers,
                           const std::vector<VoigtParams>& shells,
                           const std::vector<double>& coupling_sq) {
  const std::size_t n = shells.size();
  if (centers.size() != n || coupling_sq.size() != n)
    throw ShapeError("lg_self_energy_rhs: centers/shells/couplings disagree");
  double re = 0.0, im = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (coupling_sq[t] == 0.0) continue;
    if (coupling_sq[t] < 0.0)
      throw DomainError("lg_self_energy_rhs: negative squared coupling");
    const auto& vp = shells[t];
    const ProfileParams p(vp.sigma, vp.chi);
    const double v0 = voigt(vp.delta - vp.delta_prime, p);
    if (!(v0 > 0.0))
      throw DomainError("lg_self_energy_rhs: normalization underflows");
    const double mu1 = centers[t] + vp.delta_prime;  // Gaussian center
    const double mu2 = centers[t] + vp.delta;        // Lorentzian center
    im += coupling_sq[t] * kPi * gaussian(lambda - mu1, vp.sigma) *
          lorentzian(lambda - mu2, vp.chi) / v0;
    re += coupling_sq[t] * voigt_hilbert_identity(lambda, mu1, mu2, p);
  }
  return {re, im};
}

namespace {

Complex faddeeva_window(double lambda, double center, double chi, double sigma) {
  const double x = -(lambda - center) / (kSqrt2 * sigma);
  return Complex(0.0, chi) * faddeeva(Complex(x, 0.0));
}

}  // namespace

Complex eff_self_energy(double lambda, const EffectiveSelfEnergy& e) {
  e.validate();
  Complex g = Complex(e.delta_eff - e.vdiag, 0.0) +
              faddeeva_window(lambda, e.center, e.chi_eff, e.sigma);
  if (e.has_second)
    g += Complex(e.delta2, 0.0) +
         faddeeva_window(lambda, e.center2, e.chi2, e.sigma2);
  return g;
}

double eff_spectral_function(double lambda, double a,
                             const EffectiveSelfEnergy& e) {
  const Complex den =
      Complex(lambda - a - e.vdiag, 0.0) - eff_self_energy(lambda, e);
  return std::imag(1.0 / den) / kPi;
}

namespace {

struct VoigtSystem {
  const ShellCouplings& sc;
  const std::vector<VoigtParams>& vp;

  double norm(std::size_t s) const {
    return voigt(vp[s].delta - vp[s].delta_prime,
                 ProfileParams(vp[s].sigma, vp[s].chi));
  }

  // Peak of shell s's current profile: golden-section maximum.
  double peak(std::size_t s) const {
    const double c = sc.centers[s];
    double lo = c + std::min(vp[s].delta, vp[s].delta_prime) -
                (vp[s].chi + vp[s].sigma);
    double hi = c + std::max(vp[s].delta, vp[s].delta_prime) +
                (vp[s].chi + vp[s].sigma);
    const auto f = [&](double x) {
      return gaussian(x - c - vp[s].delta_prime, vp[s].sigma) *
             lorentzian(x - c - vp[s].delta, vp[s].chi);
    };
    const double gr = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 160 && b - a > 1e-13 * (1.0 + std::abs(a)); ++it) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b - a);
        f2 = f(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - gr * (b - a);
        f1 = f(x1);
      }
    }
    return 0.5 * (a + b);
  }

  // Near-center condition at lam for shell s: the explicit right-hand side
  // whose real/imaginary parts update (delta - vdiag, chi). The coupling sum
  // is the same closed-form self-energy as the evaluator exposes.
  Complex near_rhs(std::size_t s, double lam) const {
    std::vector<double> row(sc.size());
    for (std::size_t t = 0; t < sc.size(); ++t)
      row[t] = sc.w2(Eigen::Index(s), Eigen::Index(t));
    const Complex sum = lg_self_energy_rhs(lam, sc.centers, vp, row);
    const double gl = gaussian(lam - sc.centers[s] - vp[s].delta_prime,
                               vp[s].sigma) /
                      norm(s);
    return (lam - sc.centers[s] - sc.vdiag[s]) * (1.0 - gl) + sum * gl;
  }

  double far_rhs(std::size_t s, double lam) const {
    double acc = 0.0;
    for (std::size_t t = 0; t < sc.size(); ++t) {
      const double w = sc.w2(Eigen::Index(s), Eigen::Index(t));
      if (w == 0.0) continue;
      acc += w * gaussian(lam - sc.centers[t] - vp[t].delta_prime, vp[t].sigma) *
             lorentzian(lam - sc.centers[t] - vp[t].delta, vp[t].chi) / norm(t);
    }
    return acc;
  }
};

}  // namespace

std::vector<VoigtParams> solve_voigt(const ShellCouplings& sc,
                                     std::vector<VoigtParams> init,
                                     const SolverOptions& opts,
                                     VoigtSolveReport* report) {
  sc.validate();
  opts.validate();
  const std::size_t n = sc.size();
  if (init.size() != n)
    throw ShapeError("solve_voigt: one initial parameter set per shell required");
  for (const auto& vp : init) vp.validate();
  const double hull_lo = sc.centers.front();
  const double hull_hi = sc.centers.back();

  // Frozen tail grids from the initial widths. The far relation needs to
  // clear three full widths of the Lorentzian core and the core of the
  // Gaussian envelope; a window past the hull (huge sigma) simply disables
  // the far fit for that shell and its tail parameters stay at init.
  std::vector<std::vector<double>> grids(n);
  std::vector<char> one_sided(n, 0);
  for (std::size_t s = 0; s < n; ++s) {
    grids[s] = tail_points(sc.centers[s],
                           std::max(6.0 * init[s].chi, 2.0 * init[s].sigma),
                           6.0 * init[s].sigma, hull_lo, hull_hi, 12, 0.0);
    if (!grids[s].empty())
      one_sided[s] = grids[s].front() > sc.centers[s] ||
                     grids[s].back() < sc.centers[s];
  }

  VoigtSolveReport rep;
  rep.near_residuals.assign(n, 0.0);
  rep.far_residuals.assign(n, 0.0);
  bool tail_frozen_noted = false;

  std::vector<double> xs, ys;
  std::vector<VoigtParams> snap;
  for (int sweep = 0; sweep < opts.max_iter; ++sweep) {
    double r = 0.0;

    // Near sweep: explicit (delta, chi) update at each shell's peak, all
    // shells reading the same snapshot.
    snap = init;
    const VoigtSystem sys{sc, snap};
    for (std::size_t s = 0; s < n; ++s) {
      const Complex rhs = sys.near_rhs(s, sys.peak(s));
      const double delta_new = sc.vdiag[s] + std::real(rhs);
      const double chi_new = std::imag(rhs);
      if (!(chi_new > 0.0)) {
        if (rep.diagnostic.empty())
          rep.diagnostic = "near condition drove a width nonpositive; kept";
        continue;
      }
      r = std::max(r, std::abs(delta_new - init[s].delta));
      r = std::max(r, std::abs(chi_new - init[s].chi));
      init[s].delta += opts.damping * (delta_new - init[s].delta);
      init[s].chi += opts.damping * (chi_new - init[s].chi);
    }

    // Far sweep: (sigma, delta_prime) by tail least squares, again from a
    // common snapshot.
    snap = init;
    const VoigtSystem sysf{sc, snap};
    for (std::size_t s = 0; s < n; ++s) {
      if (grids[s].size() < 5) continue;
      xs.clear();
      ys.clear();
      for (const double lam : grids[s]) {
        const double rhs = sysf.far_rhs(s, lam);
        const double dl = lam - sc.centers[s] - sc.vdiag[s];
        const double lz = lorentzian(lam - sc.centers[s] - init[s].delta,
                                     init[s].chi);
        if (rhs < 1e-280 || std::abs(dl) < 1e-12 || lz <= 0.0) continue;
        xs.push_back(lam);
        ys.push_back(std::log(rhs) - 2.0 * std::log(std::abs(dl)) - std::log(lz));
      }
      if (xs.size() < 5) continue;
      double qa, qb, qg;
      quad_fit(xs, ys, &qa, &qb, &qg);
      if (!(qa < 0.0)) {
        if (!tail_frozen_noted) {
          rep.diagnostic = "tail shows no Gaussian decay; sigma kept";
          tail_frozen_noted = true;
        }
        continue;
      }
      const double c = sc.centers[s];
      const double hull_w = sc.centers.back() - sc.centers.front();
      const TailBox box{0.25 * hull_w / double(n - 1),
                        2.0 * hull_w,
                        sc.centers.front(),
                        sc.centers.back(),
                        c,
                        init[s].sigma};
      // Free-level shape fit, exactly like the pure-Gaussian tail stage: the
      // mean-field far relation overshoots the reachable tail level at weak
      // coupling (higher-order resolvent products carry the difference), so
      // only the decay shape constrains (sigma, delta'). Note the hybrid's
      // envelope is intrinsically narrower than the pure-Gaussian stage's:
      // here the neighbor profiles are peaked, so they pass the bare coupling
      // decay through to the tail, whereas the pure-Gaussian stage smears the
      // coupling profile by its own envelope width.
      const auto fit = fit_log_gaussian(
          xs, ys, std::sqrt(-0.5 / qa),
          one_sided[s] ? c : -qb / (2.0 * qa),
          [](double, double) { return 0.0; },
          /*free_level=*/true, /*fix_m=*/one_sided[s] != 0, box);
      rep.far_residuals[s] = fit.misfit;
      r = std::max(r, std::abs(fit.sigma - init[s].sigma));
      r = std::max(r, std::abs(fit.m - c - init[s].delta_prime));
      init[s].sigma = std::exp(std::log(init[s].sigma) +
                               opts.damping *
                                   (std::log(fit.sigma) - std::log(init[s].sigma)));
      init[s].delta_prime += opts.damping * (fit.m - c - init[s].delta_prime);
    }

    rep.iterations = sweep + 1;
    rep.residual = r;
    if (r <= opts.tol) {
      rep.converged = true;
      break;
    }
  }

  const VoigtSystem final_sys{sc, init};
  for (std::size_t s = 0; s < n; ++s)
    rep.near_residuals[s] =
        std::abs(Complex(init[s].delta - sc.vdiag[s], init[s].chi) -
                 final_sys.near_rhs(s, final_sys.peak(s)));
  if (!rep.converged && rep.diagnostic.empty())
    rep.diagnostic = "near/far alternation still moving after max_iter";
  if (report) *report = std::move(rep);
  return init;
}

namespace {

// Analytic value and lambda-derivative of the effective spectral function.
struct EffEval {
  double eps_g;
  double sigma;

  void at(double lambda, double eps_eff, double chi_eff, double* f,
          double* df) const {
    const double z = -(lambda - eps_g) / (kSqrt2 * sigma);
    const Complex w = faddeeva(Complex(z, 0.0));
    const Complex dwdl =
        (-2.0 * z * w + Complex(0.0, kTwoOverSqrtPi)) * (-1.0 / (kSqrt2 * sigma));
    const Complex den = Complex(lambda - eps_eff, 0.0) - Complex(0.0, chi_eff) * w;
    const Complex dden = Complex(1.0, 0.0) - Complex(0.0, chi_eff) * dwdl;
    *f = std::imag(1.0 / den) / kPi;
    *df = std::imag(-dden / (den * den)) / kPi;
  }
};

}  // namespace

EffectiveSelfEnergy match_effective(const VoigtParams& vp, double a,
                                    MatchReport* report) {
  vp.validate();
  const double eps_l = a + vp.delta;
  const double eps_g = a + vp.delta_prime;
  const ProfileParams p(vp.sigma, vp.chi);
  const double v0 = voigt(vp.delta - vp.delta_prime, p);

  // Exact peak of the profile: golden section seeded bracket, then Newton on
  // the closed-form logarithmic derivative.
  const auto fv = [&](double lam) {
    return gaussian(lam - eps_g, vp.sigma) * lorentzian(lam - eps_l, vp.chi) / v0;
  };
  double lo = std::min(eps_l, eps_g) - (vp.chi + vp.sigma);
  double hi = std::max(eps_l, eps_g) + (vp.chi + vp.sigma);
  const double gr = 0.6180339887498949;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = fv(x1), f2 = fv(x2);
  for (int it = 0; it < 120; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = fv(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = fv(x1);
    }
  }
  double lam_p = 0.5 * (lo + hi);
  for (int it = 0; it < 60; ++it) {
    const double dl = lam_p - eps_l, dg = lam_p - eps_g;
    const double g1 = -dg / (vp.sigma * vp.sigma) -
                      2.0 * dl / (dl * dl + vp.chi * vp.chi);
    const double g2 = -1.0 / (vp.sigma * vp.sigma) -
                      2.0 * (vp.chi * vp.chi - dl * dl) /
                          ((dl * dl + vp.chi * vp.chi) *
                           (dl * dl + vp.chi * vp.chi));
    const double step = g1 / g2;
    lam_p -= step;
    if (std::abs(step) < 1e-15 * (1.0 + std::abs(lam_p))) break;
  }
  const double height = fv(lam_p);

  // Seeds from the small-argument expansions of the matching conditions.
  double chi_eff =
      std::exp(-(lam_p - eps_g) * (lam_p - eps_g) / (2.0 * vp.sigma * vp.sigma)) /
      (kPi * height);
  const double q = 2.0 * chi_eff / (kSqrt2Pi * vp.sigma);
  double eps_eff = lam_p * (1.0 - q) + eps_g * q;

  const EffEval eval{eps_g, vp.sigma};
  const auto residual = [&](double ee, double ce, double* r1, double* r2) {
    double f, df;
    eval.at(lam_p, ee, ce, &f, &df);
    *r1 = df / height;  // peak condition, scaled to the profile height
    *r2 = f / height - 1.0;
  };

  double r1, r2;
  residual(eps_eff, chi_eff, &r1, &r2);
  double best_eps = eps_eff, best_chi = chi_eff;
  double best_norm = std::hypot(r1 * vp.sigma, r2);
  int iters = 0;
  for (; iters < 80; ++iters) {
    if (std::max(std::abs(r1) * vp.sigma, std::abs(r2)) < 1e-13) break;
    const double he = 1e-7 * (1.0 + std::abs(eps_eff));
    const double hc = 1e-7 * (1.0 + std::abs(chi_eff));
    double r1e, r2e, r1c, r2c;
    residual(eps_eff + he, chi_eff, &r1e, &r2e);
    residual(eps_eff, chi_eff + hc, &r1c, &r2c);
    const double j11 = (r1e - r1) / he, j12 = (r1c - r1) / hc;
    const double j21 = (r2e - r2) / he, j22 = (r2c - r2) / hc;
    const double det = j11 * j22 - j12 * j21;
    if (det == 0.0) break;
    const double de = (-r1 * j22 + r2 * j12) / det;
    const double dc = (-j11 * r2 + j21 * r1) / det;
    double t = 1.0;
    const double n0 = std::hypot(r1 * vp.sigma, r2);
    bool ok = false;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      const double ce = chi_eff + t * dc;
      if (!(ce > 0.0)) continue;
      double s1, s2;
      residual(eps_eff + t * de, ce, &s1, &s2);
      if (std::hypot(s1 * vp.sigma, s2) < n0) {
        eps_eff += t * de;
        chi_eff = ce;
        r1 = s1;
        r2 = s2;
        ok = true;
        if (std::hypot(r1 * vp.sigma, r2) < best_norm) {
          best_norm = std::hypot(r1 * vp.sigma, r2);
          best_eps = eps_eff;
          best_chi = chi_eff;
        }
        break;
      }
    }
    if (!ok) break;
  }
  eps_eff = best_eps;
  chi_eff = best_chi;

  EffectiveSelfEnergy e;
  e.delta_eff = eps_eff - a;
  e.chi_eff = chi_eff;
  e.sigma = vp.sigma;
  e.center = eps_g;

  if (report) {
    // Independent re-scan of the effective profile's own peak.
    double pl = lam_p;
    for (int it = 0; it < 80; ++it) {
      double f0, d0, fp, dp;
      const double h = 1e-6 * (1.0 + std::abs(pl));
      eval.at(pl, eps_eff, chi_eff, &f0, &d0);
      eval.at(pl + h, eps_eff, chi_eff, &fp, &dp);
      const double curv = (dp - d0) / h;
      if (curv == 0.0) break;
      const double step = d0 / curv;
      pl -= step;
      if (std::abs(step) < 1e-15 * (1.0 + std::abs(pl))) break;
    }
    double fpk, dpk;
    eval.at(pl, eps_eff, chi_eff, &fpk, &dpk);
    report->position_residual = std::abs(pl - lam_p);
    report->height_residual = std::abs(fpk - height) / height;
    report->in_validity_regime =
        std::abs(vp.delta - vp.delta_prime) <= vp.chi;
    report->iterations = iters;
  }
  return e;
}

CausalityReport causality_check(const EffectiveSelfEnergy& e,
                                const std::vector<double>& grid) {
  e.validate();
  if (grid.size() < 2) throw SizeError("causality_check: need at least 2 points");

  struct Window {
    double chi, sigma, center;
  };
  std::vector<Window> ws{{e.chi_eff, e.sigma, e.center}};
  if (e.has_second) ws.push_back({e.chi2, e.sigma2, e.center2});

  double lo = grid.front(), hi = grid.back(), smax = 0.0;
  for (const auto& w : ws) {
    lo = std::min(lo, w.center - 10.0 * w.sigma);
    hi = std::max(hi, w.center + 10.0 * w.sigma);
    smax = std::max(smax, w.sigma);
  }

  const auto re_f = [&](double lam) {
    double acc = 0.0;
    for (const auto& w : ws) {
      const double x = (lam - w.center) / (kSqrt2 * w.sigma);
      acc += w.chi * std::exp(-x * x);
    }
    return acc;
  };
  const auto im_f = [&](double lam) {
    double acc = 0.0;
    for (const auto& w : ws)
      acc += w.chi *
             std::imag(faddeeva(
                 Complex(-(lam - w.center) / (kSqrt2 * w.sigma), 0.0)));
    return acc;
  };

  const std::size_t n = 20001;
  std::vector<double> xs = linspace(lo, hi, n), vs(n);
  for (std::size_t k = 0; k < n; ++k) vs[k] = re_f(xs[k]);
  const GridFunction sampled(std::move(xs), std::move(vs));

  CausalityReport rep;
  std::vector<double> dev(grid.size());
  double mean = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    dev[k] = -im_f(grid[k]) - hilbert_pv(sampled, grid[k]);
    mean += dev[k] / double(grid.size());
  }
  rep.subtraction_constant = mean;
  rep.deviations.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    rep.deviations[k] = dev[k] - mean;
    rep.max_deviation = std::max(rep.max_deviation, std::abs(rep.deviations[k]));
  }
  return rep;
}

}  // namespace specres
