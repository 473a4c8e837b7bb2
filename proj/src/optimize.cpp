#include "specres/optimize.hpp"

#include <algorithm>
#include <cmath>

namespace specres {

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          const std::vector<double>& x0,
                          const std::vector<double>& steps,
                          const SimplexOptions& opts) {
  const std::size_t n = x0.size();
  if (n == 0) throw SizeError("nelder_mead: empty start point");
  if (steps.size() != n)
    throw ShapeError("nelder_mead: one initial step per dimension required");
  for (const double s : steps)
    if (s == 0.0 || !std::isfinite(s))
      throw DomainError("nelder_mead: initial steps must be finite and nonzero");

  struct Vertex {
    std::vector<double> x;
    double fx;
  };
  std::vector<Vertex> sx(n + 1);
  sx[0] = {x0, f(x0)};
  for (std::size_t d = 0; d < n; ++d) {
    auto x = x0;
    x[d] += steps[d];
    sx[d + 1] = {x, f(x)};
  }
  const auto by_value = [](const Vertex& a, const Vertex& b) { return a.fx < b.fx; };

  SimplexResult res;
  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
    std::sort(sx.begin(), sx.end(), by_value);

    double extent = 0.0, scale = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
      double lo = sx[0].x[d], hi = lo;
      for (const auto& v : sx) {
        lo = std::min(lo, v.x[d]);
        hi = std::max(hi, v.x[d]);
      }
      extent = std::max(extent, hi - lo);
      scale = std::max(scale, std::abs(sx[0].x[d]));
    }
    if (extent <= opts.xtol * (1.0 + scale) &&
        std::abs(sx[n].fx - sx[0].fx) <= opts.ftol * (1.0 + std::abs(sx[0].fx))) {
      res.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t d = 0; d < n; ++d) centroid[d] += sx[v].x[d] / double(n);

    const auto at = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t d = 0; d < n; ++d)
        x[d] = centroid[d] + t * (sx[n].x[d] - centroid[d]);
      return x;
    };

    const auto xr = at(-1.0);
    const double fr = f(xr);
    if (fr < sx[0].fx) {
      const auto xe = at(-2.0);
      const double fe = f(xe);
      sx[n] = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
      continue;
    }
    if (fr < sx[n - 1].fx) {
      sx[n] = {xr, fr};
      continue;
    }
    const auto xc = at(fr < sx[n].fx ? -0.5 : 0.5);
    const double fc = f(xc);
    if (fc < std::min(fr, sx[n].fx)) {
      sx[n] = {xc, fc};
      continue;
    }
    for (std::size_t v = 1; v <= n; ++v) {
      for (std::size_t d = 0; d < n; ++d)
        sx[v].x[d] = sx[0].x[d] + 0.5 * (sx[v].x[d] - sx[0].x[d]);
      sx[v].fx = f(sx[v].x);
    }
  }
  std::sort(sx.begin(), sx.end(), by_value);
  res.x = sx[0].x;
  res.fx = sx[0].fx;
  return res;
}

}  // namespace specres
