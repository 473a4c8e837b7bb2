#include "specres/grid.hpp"

#include <algorithm>
#include <cmath>

namespace specres {

GridFunction::GridFunction(std::vector<double> xs, std::vector<double> ys)
    : lambdas(std::move(xs)), values(std::move(ys)) {
  if (lambdas.size() != values.size())
    throw ShapeError("GridFunction: lambdas/values length mismatch");
  if (lambdas.size() < 2) throw SizeError("GridFunction: need >= 2 points");
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (!(lambdas[i] > lambdas[i - 1]))
      throw DomainError("GridFunction: lambdas must be strictly increasing");
  for (double v : values)
    if (!std::isfinite(v)) throw DomainError("GridFunction: non-finite value");
}

bool GridFunction::is_uniform(double rel_tol) const {
  const double h = (back() - front()) / double(size() - 1);
  for (std::size_t i = 1; i < size(); ++i)
    if (std::abs(lambdas[i] - lambdas[i - 1] - h) > rel_tol * std::abs(h))
      return false;
  return true;
}

double GridFunction::step() const {
  if (!is_uniform()) throw SizeError("GridFunction: grid is not uniform");
  return (back() - front()) / double(size() - 1);
}

double GridFunction::value_at(double x) const {
  if (x <= front() || x >= back()) {
    if (x == front()) return values.front();
    if (x == back()) return values.back();
    return 0.0;
  }
  auto it = std::upper_bound(lambdas.begin(), lambdas.end(), x);
  std::size_t j = std::size_t(it - lambdas.begin());
  const double x0 = lambdas[j - 1], x1 = lambdas[j];
  const double t = (x - x0) / (x1 - x0);
  return (1.0 - t) * values[j - 1] + t * values[j];
}

double GridFunction::integral() const {
  double s = 0.0;
  for (std::size_t i = 1; i < size(); ++i)
    s += 0.5 * (values[i] + values[i - 1]) * (lambdas[i] - lambdas[i - 1]);
  return s;
}

double GridFunction::max_value() const {
  return *std::max_element(values.begin(), values.end());
}

double GridFunction::min_value() const {
  return *std::min_element(values.begin(), values.end());
}

double GridFunction::argmax() const {
  auto it = std::max_element(values.begin(), values.end());
  return lambdas[std::size_t(it - values.begin())];
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw SizeError("linspace: bad range or count");
  std::vector<double> xs(n);
  const double h = (hi - lo) / double(n - 1);
  for (std::size_t i = 0; i < n; ++i) xs[i] = lo + double(i) * h;
  xs.back() = hi;
  return xs;
}

double edge_fraction(const GridFunction& f) {
  double m = 0.0;
  for (double v : f.values) m = std::max(m, std::abs(v));
  if (m == 0.0) return 0.0;
  return std::max(std::abs(f.values.front()), std::abs(f.values.back())) / m;
}

double l1_distance(const GridFunction& a, const GridFunction& b) {
  if (a.size() != b.size()) throw ShapeError("l1_distance: size mismatch");
  if (a.lambdas != b.lambdas)
    throw ShapeError("l1_distance: grids do not coincide");
  double s = 0.0;
  for (std::size_t i = 1; i < a.size(); ++i) {
    const double d1 = std::abs(a.values[i] - b.values[i]);
    const double d0 = std::abs(a.values[i - 1] - b.values[i - 1]);
    s += 0.5 * (d1 + d0) * (a.lambdas[i] - a.lambdas[i - 1]);
  }
  return s;
}

}  // namespace specres
