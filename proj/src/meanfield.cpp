#include "specres/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "specres/hilbert.hpp"
#include "specres/specfun.hpp"

namespace specres {

namespace {

// Trapezoid integral on a uniform grid with step h.
double trapz(const std::vector<double>& v, double h) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (const double x : v) s += x;
  s -= 0.5 * (v.front() + v.back());
  return s * h;
}

double l1_diff(const std::vector<double>& a, const std::vector<double>& b, double h) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = std::abs(a[k] - b[k]);
    s += (k == 0 || k + 1 == a.size()) ? 0.5 * d : d;
  }
  return s * h;
}

// The solver state shared by the per-system and per-shell entry points. All
// iteration happens in density space rho = e^S p, where the update needs no
// division by the level density.
struct EngineInput {
  std::vector<double> grid;
  std::vector<double> es;       // e^{S(lambda)} on the grid
  std::vector<double> centers;  // unperturbed center per family slot
  std::vector<std::vector<std::pair<int, double>>> nbrs;  // (slot, |V|^2)
  std::vector<int> labels;
};

MeanFieldSolution run_engine(const EngineInput& in, const SolverOptions& opts) {
  opts.validate();
  const std::size_t n_fam = in.centers.size();
  const std::size_t g = in.grid.size();
  const double h = (in.grid.back() - in.grid.front()) / double(g - 1);
  const double span = in.grid.back() - in.grid.front();
  const double eta_abs = opts.eta * span;

  std::size_t coupled = 0;
  for (std::size_t i = 0; i < n_fam; ++i)
    if (!in.nbrs[i].empty()) ++coupled;
  if (coupled == 0) throw DegenerateError("solve: system is uncoupled");
  for (std::size_t i = 0; i < n_fam; ++i)
    if (in.nbrs[i].empty())
      throw DegenerateError(
          "solve: index " + std::to_string(in.labels[i]) +
          " has no coupling; its distribution is a point mass");

  MeanFieldSolution sol;
  sol.grid = in.grid;
  sol.indices = in.labels;
  sol.level_density = in.es;

  // Seed: unit-mass Lorentzian per slot, golden-rule width from the coupling
  // weight within one smoothing window of the center.
  const double window = span / 16.0;
  std::vector<std::vector<double>> rho(n_fam, std::vector<double>(g, 0.0));
  for (std::size_t i = 0; i < n_fam; ++i) {
    double local_w2 = 0.0;
    for (const auto& [j, w2] : in.nbrs[i])
      if (std::abs(in.centers[std::size_t(j)] - in.centers[i]) <= 0.5 * window)
        local_w2 += w2;
    double chi0 = kPi * local_w2 / window;
    chi0 = std::clamp(chi0, 4.0 * h, 0.25 * span);
    for (std::size_t k = 0; k < g; ++k)
      rho[i][k] = lorentzian(in.grid[k] - in.centers[i], chi0);
    const double mass = trapz(rho[i], h);
    for (double& v : rho[i]) v /= mass;
  }

  std::vector<std::vector<double>> im(n_fam, std::vector<double>(g, 0.0));
  std::vector<std::vector<double>> re(n_fam), next(n_fam, std::vector<double>(g, 0.0));

  // One full undamped map: rho -> (im, re, next). Returns the L1 residual
  // max_i int |next_i - rho_i| and records the normalization drift.
  const auto full_map = [&](double* drift_out) {
    double drift = 0.0;
    for (std::size_t i = 0; i < n_fam; ++i) {
      auto& imi = im[i];
      std::fill(imi.begin(), imi.end(), 0.0);
      for (const auto& [j, w2] : in.nbrs[i]) {
        const auto& rj = rho[std::size_t(j)];
        for (std::size_t k = 0; k < g; ++k) imi[k] += w2 * rj[k];
      }
      double peak = 0.0;
      for (double& v : imi) {
        v *= kPi;
        if (v < 0.0) {
          v = 0.0;
          ++sol.clip_count;
        }
        peak = std::max(peak, v);
      }
      if (peak <= 0.0)
        throw DegenerateError("solve: Im G vanished for index " +
                              std::to_string(in.labels[i]));
      re[i] = hilbert_uniform(imi);
      auto& ni = next[i];
      for (std::size_t k = 0; k < g; ++k) {
        const double dr = in.grid[k] - in.centers[i] - re[i][k];
        const double gi = imi[k] + eta_abs;
        ni[k] = imi[k] / (kPi * (dr * dr + gi * gi));
      }
      const double mass = trapz(ni, h);
      if (!(mass > 0.0))
        throw DegenerateError("solve: distribution lost all mass for index " +
                              std::to_string(in.labels[i]));
      drift = std::max(drift, std::abs(mass - 1.0));
      if (opts.renormalize)
        for (double& v : ni) v /= mass;
    }
    if (drift_out) *drift_out = drift;
    double r = 0.0;
    for (std::size_t i = 0; i < n_fam; ++i)
      r = std::max(r, l1_diff(next[i], rho[i], h));
    return r;
  };

  double best_r = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best = rho;
  int stall = 0;

  for (int it = 0; it < opts.max_iter; ++it) {
    double drift = 0.0;
    const double r = full_map(&drift);
    sol.normalization_drift.push_back(drift);
    sol.iterations = it + 1;

    if (r < best_r) {
      best_r = r;
      best = rho;
      stall = 0;
    } else if (++stall >= 50) {
      rho = std::move(best);
      sol.diagnostic = "residual not improving for 50 iterations; best iterate returned";
      break;
    }

    if (r <= opts.tol) {
      // Adopt the undamped image: one further application of the map then
      // moves it by at most about the same residual.
      rho = next;
      sol.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n_fam; ++i)
      for (std::size_t k = 0; k < g; ++k)
        rho[i][k] += opts.damping * (next[i][k] - rho[i][k]);
  }
  if (!sol.converged && sol.diagnostic.empty()) {
    if (best_r < full_map(nullptr)) rho = std::move(best);
    sol.diagnostic = "max_iter reached before the residual dropped below tol";
  }

  // Report the state self-consistently: fields derived from the final rho,
  // residual measured by one more full map at that state.
  sol.residual = full_map(nullptr);
  if (sol.converged && sol.residual > opts.tol) {
    sol.converged = false;
    sol.diagnostic = "post-convergence residual check failed";
  }
  sol.p_of.reserve(n_fam);
  sol.im_g.reserve(n_fam);
  sol.re_g.reserve(n_fam);
  for (std::size_t i = 0; i < n_fam; ++i) {
    std::vector<double> p(g, 0.0);
    for (std::size_t k = 0; k < g; ++k)
      p[k] = in.es[k] > 0.0 ? rho[i][k] / in.es[k] : 0.0;
    sol.p_of.emplace_back(in.grid, std::move(p));
    sol.edge_warning =
        sol.edge_warning ||
        edge_fraction(GridFunction(in.grid, im[i])) > kEdgeWarnFraction;
    sol.im_g.emplace_back(in.grid, std::move(im[i]));
    sol.re_g.emplace_back(in.grid, std::move(re[i]));
  }
  return sol;
}

}  // namespace

void SolverOptions::validate() const {
  if (grid_points < 16) throw ConfigError("SolverOptions: grid_points must be >= 16");
  if (!(damping > 0.0) || damping > 1.0)
    throw ConfigError("SolverOptions: damping must lie in (0, 1]");
  if (max_iter < 1) throw ConfigError("SolverOptions: max_iter must be positive");
  if (!(tol > 0.0)) throw ConfigError("SolverOptions: tol must be positive");
  if (!(eta >= 0.0) || !std::isfinite(eta))
    throw ConfigError("SolverOptions: eta must be a finite nonnegative fraction");
}

GridFunction MeanFieldSolution::density(std::size_t family_slot) const {
  const auto& p = p_of.at(family_slot);
  std::vector<double> d(p.size());
  for (std::size_t k = 0; k < p.size(); ++k)
    d[k] = p.values[k] * level_density[k];
  return GridFunction(p.lambdas, std::move(d));
}

GridFunction im_g_from_p(const std::vector<GridFunction>& p_family,
                         const std::vector<double>& coupling_sq,
                         const EntropyEstimate& entropy) {
  if (p_family.size() != coupling_sq.size())
    throw ShapeError("im_g_from_p: one coupling weight per distribution required");
  if (p_family.empty()) throw ShapeError("im_g_from_p: empty family");
  const auto& grid = p_family.front().lambdas;
  for (const auto& p : p_family)
    if (p.lambdas != grid) throw ShapeError("im_g_from_p: grids do not coincide");

  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t j = 0; j < p_family.size(); ++j) {
    if (coupling_sq[j] == 0.0) continue;
    for (std::size_t k = 0; k < grid.size(); ++k)
      out[k] += coupling_sq[j] * p_family[j].values[k];
  }
  for (std::size_t k = 0; k < grid.size(); ++k)
    out[k] *= kPi * entropy.e_s_at(grid[k]);
  return GridFunction(grid, std::move(out));
}

GridFunction re_g_from_im(const GridFunction& im_g, bool* edge_warning) {
  if (edge_warning) *edge_warning = edge_fraction(im_g) > kEdgeWarnFraction;
  return hilbert_grid(im_g);
}

GridFunction p_update(int idx, const GridFunction& im_g, const GridFunction& re_g,
                      const CoupledSystem& sys, const EntropyEstimate& entropy,
                      double eta_abs, bool renormalize, int* clip_count) {
  if (im_g.lambdas != re_g.lambdas)
    throw ShapeError("p_update: Im G and Re G grids do not coincide");
  if (idx < 0 || idx >= sys.dim) throw SizeError("p_update: index out of range");
  const double center = sys.a[idx] + sys.vdiag[idx];
  const auto& grid = im_g.lambdas;

  double peak = 0.0;
  std::vector<double> p(grid.size(), 0.0), rho(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double iv = im_g.values[k];
    if (iv < 0.0) {
      iv = 0.0;
      if (clip_count) ++(*clip_count);
    }
    peak = std::max(peak, iv);
    const double dr = grid[k] - center - re_g.values[k];
    const double gi = iv + eta_abs;
    rho[k] = iv / (kPi * (dr * dr + gi * gi));
    const double es = entropy.e_s_at(grid[k]);
    p[k] = es > 0.0 ? rho[k] / es : 0.0;
  }
  if (peak <= 0.0)
    throw DegenerateError("p_update: Im G is identically zero (uncoupled index)");
  if (renormalize) {
    const double mass = GridFunction(grid, rho).integral();
    if (!(mass > 0.0))
      throw DegenerateError("p_update: distribution carries no mass on the grid");
    for (double& v : p) v /= mass;
  }
  return GridFunction(grid, std::move(p));
}

MeanFieldSolution solve_meanfield(const CoupledSystem& sys, const SolverOptions& opts) {
  sys.validate();
  if (sys.dim < 2) throw SizeError("solve_meanfield: need at least 2 coupled indices");

  std::vector<double> centers(std::size_t(sys.dim));
  for (int i = 0; i < sys.dim; ++i)
    centers[std::size_t(i)] = sys.a[i] + sys.vdiag[i];

  std::vector<double> sorted = centers;
  std::sort(sorted.begin(), sorted.end());
  const double spacing =
      (sorted.back() - sorted.front()) / double(sys.dim - 1);
  const auto entropy = estimate_entropy(centers, 20.0 * spacing);

  EngineInput in;
  in.grid = linspace(entropy.lambdas.front(), entropy.lambdas.back(),
                     std::size_t(opts.grid_points));
  in.es.resize(in.grid.size());
  for (std::size_t k = 0; k < in.grid.size(); ++k)
    in.es[k] = entropy.e_s_at(in.grid[k]);
  in.centers = centers;
  in.labels.resize(std::size_t(sys.dim));
  in.nbrs.resize(std::size_t(sys.dim));
  for (int i = 0; i < sys.dim; ++i) {
    in.labels[std::size_t(i)] = i;
    for (int j = 0; j < sys.dim; ++j) {
      const double v = sys.vcoupling(i, j);
      if (v != 0.0) in.nbrs[std::size_t(i)].emplace_back(j, v * v);
    }
  }
  return run_engine(in, opts);
}

MeanFieldSolution solve_meanfield_shells(const EnsembleProfile& profile,
                                         const SolverOptions& opts, int n_shells) {
  if (n_shells < 2) throw ConfigError("solve_meanfield_shells: need at least 2 shells");
  if (profile.entropy.size() < 2)
    throw ConfigError("solve_meanfield_shells: entropy profile too short");
  const double lo = profile.entropy.front();
  const double hi = profile.entropy.back();
  const double bin = (hi - lo) / double(n_shells);

  EngineInput in;
  in.centers.resize(std::size_t(n_shells));
  in.labels.resize(std::size_t(n_shells));
  std::vector<double> counts(static_cast<std::size_t>(n_shells), 0.0);
  for (int s = 0; s < n_shells; ++s) {
    in.centers[std::size_t(s)] = lo + (double(s) + 0.5) * bin;
    in.labels[std::size_t(s)] = s;
    counts[std::size_t(s)] =
        std::exp(profile.entropy.value_at(in.centers[std::size_t(s)])) * bin;
  }

  in.nbrs.resize(std::size_t(n_shells));
  for (int s = 0; s < n_shells; ++s) {
    for (int t = 0; t < n_shells; ++t) {
      const double mid = 0.5 * (in.centers[std::size_t(s)] + in.centers[std::size_t(t)]);
      const double delta = in.centers[std::size_t(s)] - in.centers[std::size_t(t)];
      const double f2 = profile.bandwidth_fn(mid, delta);
      if (f2 < 0.0)
        throw DomainError("solve_meanfield_shells: negative bandwidth profile");
      const double w2 =
          counts[std::size_t(t)] * std::exp(-profile.entropy.value_at(mid)) * f2;
      if (w2 > 0.0) in.nbrs[std::size_t(s)].emplace_back(t, w2);
    }
  }

  in.grid = linspace(lo, hi, std::size_t(opts.grid_points));
  in.es.resize(in.grid.size());
  for (std::size_t k = 0; k < in.grid.size(); ++k)
    in.es[k] = std::exp(profile.entropy.value_at(in.grid[k]));
  return run_engine(in, opts);
}

}  // namespace specres
