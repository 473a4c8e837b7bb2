#pragma once

#include "specres/common.hpp"
#include "specres/grid.hpp"

namespace specres {

// Width pair shared by the Voigt-type profiles: Gaussian sigma, Lorentzian
// half-width chi, both in energy units and strictly positive.
struct ProfileParams {
  double sigma;
  double chi;
  ProfileParams(double s, double c) : sigma(s), chi(c) {
    if (!(sigma > 0.0)) throw DomainError("ProfileParams: sigma must be > 0");
    if (!(chi > 0.0)) throw DomainError("ProfileParams: chi must be > 0");
  }
};

// Scaled complex error function w(z) = exp(-z^2) erfc(-iz).
// Relative accuracy: <= 1e-10 for Im z >= 0, <= 1e-8 below the axis within
// |z| <= 50. Throws RangeError when exp(-z^2) overflows (deep lower half
// plane).
Complex faddeeva(Complex z);

// L(x; chi) = chi / (pi (chi^2 + x^2)), unit mass.
double lorentzian(double x, double chi);

// G(x; sigma) = exp(-x^2 / 2 sigma^2) / (sqrt(2 pi) sigma), unit mass.
double gaussian(double x, double sigma);

// Voigt profile: Re w((x + i chi) / (sqrt(2) sigma)) / (sqrt(2 pi) sigma),
// the Gaussian-Lorentzian convolution.
double voigt(double x, const ProfileParams& p);

// Dispersion profile: Im w((x + i chi) / (sqrt(2) sigma)) / (sqrt(2 pi) sigma),
// the Hilbert transform of the Voigt profile. Odd in x.
double dispersion(double x, const ProfileParams& p);

// Closed form for the normalized principal-value integral
//   PV int G(l - mu1; sigma) L(l - mu2; chi) / (lambda' - l) dl / V(x0)
// with x0 = mu2 - mu1, x' = lambda' - mu1, Delta = lambda' - mu2:
//   [Delta + chi (D(x'; sigma, 0) - D(x0; sigma, chi)) / V(x0)] /
//   (Delta^2 + chi^2).
double voigt_hilbert_identity(double lambda_prime, double mu1, double mu2,
                              const ProfileParams& p);

}  // namespace specres
