#include "specres/hilbert.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>

namespace specres {

namespace {

// Smallest power of two >= n.
std::size_t next_pow2(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

}  // namespace

double hilbert_kernel_weight(long s) {
  if (s == 0) return 0.0;
  if (s < 0) return -hilbert_kernel_weight(-s);
  const double sd = double(s);
  // (s-1) log|s/(s-1)| - (s+1) log|(s+1)/s|, with the s = 1 first term zero.
  const double left = (s == 1) ? 0.0 : (sd - 1.0) * std::log(sd / (sd - 1.0));
  const double right = (sd + 1.0) * std::log((sd + 1.0) / sd);
  return left - right;
}

std::vector<double> hilbert_uniform_direct(const std::vector<double>& f) {
  const long g = long(f.size());
  std::vector<double> out(f.size(), 0.0);
  if (g == 0) return out;
  // Precompute one kernel row; weights for offsets -(g-1)..(g-1).
  std::vector<double> w(std::size_t(2 * g - 1));
  for (long s = -(g - 1); s <= g - 1; ++s)
    w[std::size_t(s + g - 1)] = hilbert_kernel_weight(s);
  for (long i = 0; i < g; ++i) {
    double acc = 0.0;
    for (long j = 0; j < g; ++j) acc += w[std::size_t(j - i + g - 1)] * f[std::size_t(j)];
    out[std::size_t(i)] = acc / kPi;
  }
  return out;
}

std::vector<double> hilbert_uniform(const std::vector<double>& f) {
  const std::size_t g = f.size();
  if (g < 64) return hilbert_uniform_direct(f);

  // y_i = sum_j K_{i-j} f_j with K_d = weight(-d); circulant embedding of the
  // Toeplitz kernel needs M >= 2g - 1 so offsets never alias.
  const std::size_t m = next_pow2(2 * g);

  // Fixed-point solvers transform many signals of one length; keep the last
  // kernel spectrum and the FFT plans around.
  thread_local std::size_t cached_g = 0;
  thread_local std::vector<std::complex<double>> ka;
  thread_local Eigen::FFT<double> fft;
  if (cached_g != g) {
    std::vector<double> kern(m, 0.0);
    for (std::size_t d = 0; d < g; ++d) kern[d] = hilbert_kernel_weight(-long(d));
    for (std::size_t d = 1; d < g; ++d) kern[m - d] = hilbert_kernel_weight(long(d));
    fft.fwd(ka, kern);
    cached_g = g;
  }

  std::vector<double> fpad(m, 0.0);
  std::copy(f.begin(), f.end(), fpad.begin());
  std::vector<std::complex<double>> fa(m);
  fft.fwd(fa, fpad);
  for (std::size_t i = 0; i < m; ++i) fa[i] *= ka[i];
  std::vector<double> conv(m);
  fft.inv(conv, fa);

  std::vector<double> out(g);
  for (std::size_t i = 0; i < g; ++i) out[i] = conv[i] / kPi;
  return out;
}

GridFunction hilbert_grid(const GridFunction& f) {
  if (!f.is_uniform())
    throw SizeError("hilbert_grid: grid must be uniform");
  return GridFunction(f.lambdas, hilbert_uniform(f.values));
}

double hilbert_pv(const GridFunction& f, double lambda, bool* edge_warning) {
  if (f.size() < 2) throw SizeError("hilbert_pv: need at least 2 samples");
  if (edge_warning) *edge_warning = edge_fraction(f) > kEdgeWarnFraction;

  const double lo = std::min(f.front(), lambda);
  const double hi = std::max(f.back(), lambda);
  const std::size_t n = std::max<std::size_t>(kHilbertPointNodes, 4 * f.size() + 1);
  const double h = (hi - lo) / double(n - 1);

  // Shift the grid so lambda lands exactly on a node, then extend it to keep
  // covering [lo, hi].
  const long k = std::lround((lambda - lo) / h);
  const double start = lambda - double(k) * h;
  const long m = long(std::ceil((hi - start) / h - 1e-12)) + 1;

  double acc = 0.0;
  for (long j = 0; j < m; ++j) {
    const double fj = f.value_at(start + double(j) * h);
    if (fj != 0.0) acc += hilbert_kernel_weight(j - k) * fj;
  }
  return acc / kPi;
}

}  // namespace specres
