#include <doctest.h>

#include <cmath>
#include <complex>

#include "oracles.hpp"
#include "specres/specfun.hpp"

using namespace specres;

namespace {
#include "faddeeva_reference.inc"
}

TEST_SUITE("specfun") {

TEST_CASE("faddeeva matches the high-precision reference table") {
  for (const auto& row : kFaddeevaRef) {
    const Complex got = faddeeva({row.x, row.y});
    const double scale =
        std::max(std::hypot(row.re, row.im), 1e-300);
    const double err = std::hypot(got.real() - row.re, got.imag() - row.im) / scale;
    const double tol = row.y >= 0.0 ? 1e-10 : 1e-8;
    INFO("z = (", row.x, ", ", row.y, ")");
    CHECK(err <= tol);
  }
}

TEST_CASE("faddeeva closed-form anchors") {
  // w(i) = exp(1) erfc(1)
  const Complex wi = faddeeva({0.0, 1.0});
  CHECK(wi.real() == doctest::Approx(0.42758357615580700441).epsilon(1e-12));
  CHECK(wi.imag() == doctest::Approx(0.0));

  // On the real axis Re w(x) = exp(-x^2).
  for (double x : {0.3, 1.7, 4.0, 9.5}) {
    CHECK(faddeeva({x, 0.0}).real() ==
          doctest::Approx(std::exp(-x * x)).epsilon(1e-12));
  }
}

TEST_CASE("faddeeva asymptotic form far from the origin") {
  // w(z) ~ i / (sqrt(pi) z) for large |z| away from the negative imaginary
  // axis.
  const double r = 30.0;
  for (double phase : {0.1, 0.8, 1.5, 2.3, 3.0}) {
    const Complex z(r * std::cos(phase), r * std::sin(phase));
    const Complex expect = Complex(0.0, 1.0) / (std::sqrt(kPi) * z);
    const Complex got = faddeeva(z);
    CHECK(std::abs(got - expect) / std::abs(expect) < 2e-3);
  }
}

TEST_CASE("faddeeva overflow guard deep in the lower half plane") {
  CHECK_THROWS_AS(faddeeva({0.0, -30.0}), RangeError);
  CHECK_NOTHROW(faddeeva({30.0, -30.0}));
}

TEST_CASE("profile parameter validation") {
  CHECK_THROWS_AS(ProfileParams(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(ProfileParams(1.0, -1.0), DomainError);
  CHECK_THROWS_AS(lorentzian(0.0, 0.0), DomainError);
  CHECK_THROWS_AS(gaussian(0.0, -2.0), DomainError);
}

TEST_CASE("voigt narrow-sigma limit approaches the Lorentzian") {
  const double chi = 0.8;
  for (double x : {0.0, 0.5, 2.0}) {
    const double v = voigt(x, ProfileParams(1e-4, chi));
    CHECK(v == doctest::Approx(lorentzian(x, chi)).epsilon(1e-6));
  }
}

TEST_CASE("voigt narrow-chi limit approaches the Gaussian") {
  const double sigma = 0.6;
  for (double x : {0.0, 0.5, 2.0}) {
    const double v = voigt(x, ProfileParams(sigma, 1e-8));
    CHECK(v == doctest::Approx(gaussian(x, sigma)).epsilon(1e-6));
  }
}

TEST_CASE("voigt and dispersion reference values") {
  const ProfileParams p(1.3, 0.4);
  CHECK(voigt(0.7, p) ==
        doctest::Approx(0.21783582518454741533).epsilon(1e-12));
  CHECK(dispersion(0.7, p) ==
        doctest::Approx(0.08447291075664766694).epsilon(1e-12));
}

TEST_CASE("voigt has unit mass") {
  const ProfileParams p(0.9, 0.35);
  // Map (-inf, inf) -> (-pi/2, pi/2) with x = s tan(theta).
  const double s = 5.0;
  auto integrand = [&](double th) {
    const double c = std::cos(th);
    return voigt(s * std::tan(th), p) * s / (c * c);
  };
  const double mass = oracles::integrate(integrand, -kPi / 2 + 1e-12,
                                         kPi / 2 - 1e-12, 1e-11);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("dispersion is odd and matches a principal-value quadrature") {
  const ProfileParams p(0.7, 0.25);
  CHECK(dispersion(1.1, p) == doctest::Approx(-dispersion(-1.1, p)));
  CHECK(dispersion(0.0, p) == doctest::Approx(0.0));

  // dispersion(x) = (1/pi) PV int voigt(t) / (x - t) dt.
  auto prof = [&](double t) { return voigt(t, p); };
  for (double x : {0.4, 1.3}) {
    const double pv = oracles::pv_integral(prof, x, -60.0, 60.0, 1e-11) / kPi;
    CHECK(dispersion(x, p) == doctest::Approx(pv).epsilon(1e-7));
  }
}

TEST_CASE("gaussian-lorentzian pv integral closed form") {
  const ProfileParams p(0.8, 0.3);
  const double mu1 = -0.2, mu2 = 0.5;
  auto gl = [&](double l) {
    return gaussian(l - mu1, p.sigma) * lorentzian(l - mu2, p.chi);
  };
  const double v0 = voigt(mu2 - mu1, p);
  for (double lp : {-0.7, 0.1, 1.4}) {
    const double pv = oracles::pv_integral(gl, lp, -40.0, 40.0, 1e-12) / v0;
    CHECK(voigt_hilbert_identity(lp, mu1, mu2, p) ==
          doctest::Approx(pv).epsilon(1e-7));
  }
}

TEST_CASE("gaussian-lorentzian pv integral wide-sigma limit") {
  // For sigma >> widths the Gaussian is flat across the Lorentzian and the
  // integral reduces to the pure Lorentzian case:
  // PV int L / (lambda' - l) dl / L-ish normalization -> Delta / (Delta^2 + chi^2).
  const ProfileParams p(1e4, 0.3);
  const double mu1 = 0.0, mu2 = 0.1;
  for (double lp : {-0.5, 0.9}) {
    const double delta = lp - mu2;
    CHECK(voigt_hilbert_identity(lp, mu1, mu2, p) ==
          doctest::Approx(delta / (delta * delta + p.chi * p.chi))
              .epsilon(1e-4));
  }
}

TEST_CASE("gaussian-lorentzian pv integral vanishes at the shared center") {
  const ProfileParams p(0.8, 0.3);
  // mu1 = mu2 and lambda' = mu2: the integrand is odd about the pole.
  CHECK(voigt_hilbert_identity(0.5, 0.5, 0.5, p) == doctest::Approx(0.0));
}

}  // TEST_SUITE
