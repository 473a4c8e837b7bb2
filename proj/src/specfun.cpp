#include "specres/specfun.hpp"

#include <cmath>

namespace specres {

// Region-based evaluation in the first quadrant: Maclaurin series near the
// origin, a Taylor/recursion scheme in the mid region, and the Laplace
// continued fraction outside. Other quadrants follow from
// w(-conj(z)) = conj(w(z)) and w(z) = 2 exp(-z^2) - conj(w(conj(z))).
Complex faddeeva(Complex z) {
  const double xi = z.real(), yi = z.imag();
  const double xabs = std::abs(xi), yabs = std::abs(yi);
  const double x = xabs / 6.3, y = yabs / 4.4;
  const double qrho0 = x * x + y * y;

  const double xabsq = xabs * xabs;
  double xquad = xabsq - yabs * yabs;
  const double yquad = 2.0 * xabs * yabs;

  if (yi < 0.0 && yabs * yabs - xabsq > 708.0)
    throw RangeError("faddeeva: exp(-z^2) overflows for this z");

  double u, v;
  double u2 = 0.0, v2 = 0.0;
  const bool series = qrho0 < 0.085264;

  if (series) {
    // Power series; the term count tracks the distance from the origin.
    const double qrho = (1.0 - 0.85 * y) * std::sqrt(qrho0);
    const int n = int(std::nearbyint(6.0 + 72.0 * qrho));
    int j = 2 * n + 1;
    double xsum = 1.0 / double(j), ysum = 0.0;
    for (int i = n; i >= 1; --i) {
      j -= 2;
      const double xaux = (xsum * xquad - ysum * yquad) / double(i);
      ysum = (xsum * yquad + ysum * xquad) / double(i);
      xsum = xaux + 1.0 / double(j);
    }
    const double u1 = -kTwoOverSqrtPi * (xsum * yabs + ysum * xabs) + 1.0;
    const double v1 = kTwoOverSqrtPi * (xsum * xabs - ysum * yabs);
    const double daux = std::exp(-xquad);
    u2 = daux * std::cos(yquad);
    v2 = -daux * std::sin(yquad);
    u = u1 * u2 - v1 * v2;
    v = u1 * v2 + v1 * u2;
  } else {
    double h = 0.0, h2 = 0.0, qlambda = 0.0;
    int kapn = 0, nu;
    if (qrho0 > 1.0) {
      // Laplace continued fraction.
      const double qrho = std::sqrt(qrho0);
      nu = int(3.0 + 1442.0 / (26.0 * qrho + 77.0));
    } else {
      // Truncated Taylor with downward recursion.
      const double qrho = (1.0 - y) * std::sqrt(1.0 - qrho0);
      h = 1.88 * qrho;
      h2 = 2.0 * h;
      kapn = int(std::nearbyint(7.0 + 34.0 * qrho));
      nu = int(std::nearbyint(16.0 + 26.0 * qrho));
    }
    const bool taylor = h > 0.0;
    if (taylor) qlambda = std::pow(h2, kapn);
    double rx = 0.0, ry = 0.0, sx = 0.0, sy = 0.0;
    for (int n = nu; n >= 0; --n) {
      const double np1 = double(n + 1);
      const double tx = yabs + h + np1 * rx;
      const double ty = xabs - np1 * ry;
      const double c = 0.5 / (tx * tx + ty * ty);
      rx = c * tx;
      ry = c * ty;
      if (taylor && n <= kapn) {
        const double saux = sx + qlambda;
        sx = rx * saux - ry * sy;
        sy = ry * saux + rx * sy;
        qlambda /= h2;
      }
    }
    if (taylor) {
      u = kTwoOverSqrtPi * sx;
      v = kTwoOverSqrtPi * sy;
    } else {
      u = kTwoOverSqrtPi * rx;
      v = kTwoOverSqrtPi * ry;
    }
    if (yabs == 0.0) u = std::exp(-xabsq);
  }

  if (yi < 0.0) {
    if (series) {
      u2 *= 2.0;
      v2 *= 2.0;
    } else {
      xquad = -xquad;
      const double w1 = 2.0 * std::exp(xquad);
      u2 = w1 * std::cos(yquad);
      v2 = -w1 * std::sin(yquad);
    }
    u = u2 - u;
    v = v2 - v;
    if (xi > 0.0) v = -v;
  } else {
    if (xi < 0.0) v = -v;
  }
  return {u, v};
}

double lorentzian(double x, double chi) {
  if (!(chi > 0.0)) throw DomainError("lorentzian: chi must be > 0");
  return chi / (kPi * (chi * chi + x * x));
}

double gaussian(double x, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("gaussian: sigma must be > 0");
  const double t = x / sigma;
  return std::exp(-0.5 * t * t) / (kSqrt2Pi * sigma);
}

double voigt(double x, const ProfileParams& p) {
  const Complex zeta(x / (std::sqrt(2.0) * p.sigma),
                     p.chi / (std::sqrt(2.0) * p.sigma));
  return faddeeva(zeta).real() / (kSqrt2Pi * p.sigma);
}

double dispersion(double x, const ProfileParams& p) {
  const Complex zeta(x / (std::sqrt(2.0) * p.sigma),
                     p.chi / (std::sqrt(2.0) * p.sigma));
  return faddeeva(zeta).imag() / (kSqrt2Pi * p.sigma);
}

double voigt_hilbert_identity(double lambda_prime, double mu1, double mu2,
                              const ProfileParams& p) {
  const double x0 = mu2 - mu1;
  const double xp = lambda_prime - mu1;
  const double delta = lambda_prime - mu2;
  const double v0 = voigt(x0, p);
  // chi -> 0 limit of the dispersion profile: the Hilbert transform of the
  // Gaussian itself, evaluated on the real axis.
  const double dg = faddeeva(Complex(xp / (std::sqrt(2.0) * p.sigma), 0.0)).imag() /
                    (kSqrt2Pi * p.sigma);
  const double d0 = dispersion(x0, p);
  return (delta + p.chi * (dg - d0) / v0) / (delta * delta + p.chi * p.chi);
}

}  // namespace specres
