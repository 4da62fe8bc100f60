#include "pertasym/eos.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include "pertasym/error.hpp"

namespace pertasym {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

EquationOfState EquationOfState::linear(double w) {
  if (!(w >= 0.0 && w <= 1.0)) fail(ErrorKind::Domain, "linear equation of state needs w in [0,1]");
  return EquationOfState(LinearEos{w});
}

EquationOfState EquationOfState::power_law(double w, std::vector<PowerLawTerm> terms) {
  if (!(w >= 0.0 && w <= 1.0)) fail(ErrorKind::Domain, "power law needs w in [0,1]");
  if (terms.empty()) fail(ErrorKind::Domain, "power law needs at least one correction term");
  for (const auto& t : terms)
    if (!std::isfinite(t.f) || !std::isfinite(t.a) || t.a == 1.0)
      fail(ErrorKind::Domain, "power law terms need finite coefficients and exponents != 1");
  bool below = true, above = true;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    below = below && terms[j].a < 1.0 && (j == 0 || terms[j].a < terms[j - 1].a);
    above = above && terms[j].a > 1.0 && (j == 0 || terms[j].a > terms[j - 1].a);
  }
  if (!below && !above)
    fail(ErrorKind::Domain,
         "power law exponents must be all < 1 and decreasing or all > 1 and increasing");
  if (w == 0.0 && !(terms[0].f > 0.0))
    fail(ErrorKind::Domain, "power law with w = 0 needs a positive leading coefficient");
  PowerLawEos p{w, std::move(terms), below ? ExpansionSide::HighDensity : ExpansionSide::LowDensity};
  return EquationOfState(std::move(p));
}

EquationOfState EquationOfState::polytropic(double K, double n) {
  if (!(K > 0.0 && K < 1.0)) fail(ErrorKind::Domain, "polytropic K must lie in (0,1)");
  if (!(n > 1.0) || !std::isfinite(n)) fail(ErrorKind::Domain, "polytropic index n must be > 1");
  return EquationOfState(PolytropicEos{K, n});
}

bool EquationOfState::is_dust() const {
  const auto* l = std::get_if<LinearEos>(&v_);
  return l && l->w == 0.0;
}

double EquationOfState::limiting_w() const {
  return std::visit(Overloaded{[](const LinearEos& l) { return l.w; },
                               [](const PowerLawEos& p) { return p.w; },
                               [](const PolytropicEos& p) { return 1.0 / p.n; }},
                    v_);
}

std::string EquationOfState::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{[&](const LinearEos& l) { os << "linear(w=" << l.w << ")"; },
                        [&](const PowerLawEos& p) {
                          os << "powerlaw(w=" << p.w;
                          for (const auto& t : p.terms) os << ", " << t.f << "*eps^" << t.a;
                          os << ")";
                        },
                        [&](const PolytropicEos& p) {
                          os << "polytropic(K=" << p.K << ", n=" << p.n << ")";
                        }},
             v_);
  return os.str();
}

double polytropic_parameter(const PolytropicEos& p, double eps) {
  if (eps < 0.0) fail(ErrorKind::Domain, "negative energy density");
  if (eps == 0.0) return 0.0;
  const double q = (p.n + 1.0) / p.n;
  // eps(m) is increasing with eps(m) >= m, so the root lies in (0, eps]
  auto fn = [&](double m) {
    const double mp = std::pow(m, 1.0 / p.n);
    const double val = m + p.K * p.n * m * mp - eps;
    const double der = 1.0 + p.K * (p.n + 1.0) * mp;
    return std::make_pair(val, der);
  };
  const double guess = std::min(eps, std::pow(eps / (p.K * p.n), 1.0 / q));
  std::uintmax_t iters = 200;
  const int digits = std::numeric_limits<double>::digits - 4;
  const double m = boost::math::tools::newton_raphson_iterate(fn, guess, 0.0, eps, digits, iters);
  if (iters >= 200 || !std::isfinite(m))
    fail(ErrorKind::Numeric, "polytropic inversion did not converge");
  const double resid = std::abs(fn(m).first) / eps;
  if (resid > 1e-12) fail(ErrorKind::Numeric, "polytropic inversion residual above 1e-12");
  return m;
}

EosDerivatives eos_derivatives(const EquationOfState& eos, double eps) {
  if (eps < 0.0 || std::isnan(eps)) fail(ErrorKind::Domain, "negative energy density");
  return std::visit(
      Overloaded{
          [&](const LinearEos& l) { return EosDerivatives{l.w * eps, l.w, 0.0, 0.0}; },
          [&](const PowerLawEos& p) {
            EosDerivatives d{p.w * eps, p.w, 0.0, 0.0};
            if (eps == 0.0) return d;
            for (const auto& t : p.terms) {
              const double e = std::pow(eps, t.a);
              d.f += t.f * e;
              d.fp += t.f * t.a * e / eps;
              d.fpp += t.f * t.a * (t.a - 1.0) * e / (eps * eps);
              d.fppp += t.f * t.a * (t.a - 1.0) * (t.a - 2.0) * e / (eps * eps * eps);
            }
            return d;
          },
          [&](const PolytropicEos& p) {
            if (eps == 0.0) return EosDerivatives{};
            const double m = polytropic_parameter(p, eps);
            const double s = 1.0 / p.n;
            const double q = 1.0 + s;
            const double ms = std::pow(m, s);
            // parametric derivatives with respect to m
            const double e1 = 1.0 + p.K * (p.n + 1.0) * ms;
            const double e2 = p.K * (p.n + 1.0) * s * ms / m;
            const double e3 = e2 * (s - 1.0) / m;
            const double p0 = p.K * m * ms;
            const double p1 = p.K * q * ms;
            const double p2 = p.K * q * s * ms / m;
            const double p3 = p2 * (s - 1.0) / m;
            const double num = p2 * e1 - p1 * e2;
            const double num_m = p3 * e1 - p1 * e3;
            EosDerivatives d;
            d.f = p0;
            d.fp = p1 / e1;
            d.fpp = num / (e1 * e1 * e1);
            d.fppp = (num_m * e1 - 3.0 * num * e2) / std::pow(e1, 5);
            return d;
          }},
      eos.variant());
}

double eos_pressure(const EquationOfState& eos, double eps) {
  return eos_derivatives(eos, eps).f;
}

double eos_sound_speed_sq(const EquationOfState& eos, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::Domain, "sound speed needs eps > 0");
  const double fp = eos_derivatives(eos, eps).fp;
  if (!(fp >= 0.0 && fp <= 1.0)) {
    std::ostringstream os;
    os << "f'(" << eps << ") = " << fp << " outside [0,1]";
    fail(ErrorKind::Physicality, os.str());
  }
  return fp;
}

double mass_density(const EquationOfState& eos, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::Domain, "mass density needs eps > 0");
  if (eps == 1.0) return 1.0;
  if (const auto* l = std::get_if<LinearEos>(&eos.variant()))
    return std::pow(eps, 1.0 / (1.0 + l->w));
  // in s = ln xi the integrand xi / (xi + f) is bounded by 1
  auto g = [&](double s) {
    const double xi = std::exp(s);
    return xi / (xi + eos_pressure(eos, xi));
  };
  double err = 0.0;
  const double upper = std::log(eps);
  const double lnm =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, 0.0, upper, 15, 1e-13, &err);
  if (!std::isfinite(lnm) || err > 1e-10 * std::max(1.0, std::abs(lnm)))
    fail(ErrorKind::Numeric, "mass density quadrature did not converge at eps = " + std::to_string(eps));
  return std::exp(lnm);
}

TauCoefficients tau_coefficients(const EquationOfState& eos, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::Domain, "tau coefficients need eps > 0");
  const auto d = eos_derivatives(eos, eps);
  if (!(d.fp > 0.0)) fail(ErrorKind::Domain, "tau coefficients need f' > 0");
  return {d.fp - d.f / eps, 1.0 + d.fp - 0.5 * (eps + d.f) * d.fpp / d.fp};
}

}  // namespace pertasym
