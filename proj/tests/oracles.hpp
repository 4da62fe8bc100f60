#pragma once

// Closed-form reference solutions used by the tests. Built on Boost special
// functions only, independent of the library's integrators.

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>

namespace oracle {

inline double nu_of(double w) { return 0.5 * (5.0 + 3.0 * w) / (1.0 + 3.0 * w); }

// u = eta^{-nu} (c1 J_nu(lam eta) + c2 Y_nu(lam eta)), lam = sqrt(w) |k|, solves
// u'' + (2 nu + 1) u' / eta + lam^2 u = 0.
struct BesselMode {
  double nu, lam, c1, c2;
  double u(double eta) const {
    const double x = lam * eta;
    return std::pow(eta, -nu) *
           (c1 * boost::math::cyl_bessel_j(nu, x) + c2 * boost::math::cyl_neumann(nu, x));
  }
  // (eta^{-nu} Z_nu(lam eta))' = -lam eta^{-nu} Z_{nu+1}(lam eta)
  double du(double eta) const {
    const double x = lam * eta;
    return -lam * std::pow(eta, -nu) *
           (c1 * boost::math::cyl_bessel_j(nu + 1.0, x) +
            c2 * boost::math::cyl_neumann(nu + 1.0, x));
  }
};

// Solutions of the same equation normalised at the singularity:
// U1 ~ eta^{-2 nu} (1 + ...), U2 ~ 1 + ..., for non-integer nu.
struct SingularBasis {
  double nu, lam;
  double U1(double eta) const {
    return std::pow(eta, -nu) * boost::math::cyl_bessel_j(-nu, lam * eta) *
           boost::math::tgamma(1.0 - nu) * std::pow(lam / 2.0, nu);
  }
  double U2(double eta) const {
    return std::pow(eta, -nu) * boost::math::cyl_bessel_j(nu, lam * eta) *
           boost::math::tgamma(1.0 + nu) * std::pow(2.0 / lam, nu);
  }
};

// P'' + P'/t + n^2 P = 0 with P ~ k log t + omega as t -> 0.
struct GowdyMode {
  double n, k, omega;
  double P(double t) const {
    if (n == 0.0) return k * std::log(t) + omega;
    const double x = n * t;
    const double y0 = boost::math::cyl_neumann(0, x);
    const double j0 = boost::math::cyl_bessel_j(0, x);
    return k * (std::numbers::pi / 2.0 * y0 - (std::log(n / 2.0) + std::numbers::egamma) * j0) +
           omega * j0;
  }
  double dP(double t) const {
    if (n == 0.0) return k / t;
    const double x = n * t;
    const double y1 = boost::math::cyl_neumann(1, x);
    const double j1 = boost::math::cyl_bessel_j(1, x);
    return -n * (k * (std::numbers::pi / 2.0 * y1 - (std::log(n / 2.0) + std::numbers::egamma) * j1) +
                 omega * j1);
  }
};

}  // namespace oracle
