#include <doctest.h>

#include <cmath>
#include <random>

#include "pertasym/background.hpp"
#include "pertasym/error.hpp"

using namespace pertasym;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Domain;
}

}  // namespace

TEST_CASE("pressure examples") {
  CHECK(eos_pressure(EquationOfState::linear(1.0 / 3.0), 3.0) == doctest::Approx(1.0));
  const auto poly = EquationOfState::polytropic(0.1, 2.0);
  CHECK(eos_pressure(poly, 1.2) == doctest::Approx(0.1).epsilon(1e-13));
  CHECK(polytropic_parameter(std::get<PolytropicEos>(poly.variant()), 1.2) ==
        doctest::Approx(1.0).epsilon(1e-13));
  const auto pl = EquationOfState::power_law(0.0, {{1.0, 1.5}});
  CHECK(eos_pressure(pl, 4.0) == doctest::Approx(8.0));
  CHECK(eos_pressure(pl, 0.0) == 0.0);
  CHECK(eos_pressure(poly, 0.0) == 0.0);
  CHECK(kind_of([&] { eos_pressure(pl, -1.0); }) == ErrorKind::Domain);
}

TEST_CASE("sound speed examples") {
  CHECK(eos_sound_speed_sq(EquationOfState::linear(0.2), 7.0) == doctest::Approx(0.2));
  CHECK(eos_sound_speed_sq(EquationOfState::power_law(0.0, {{0.1, 1.5}}), 1.0) ==
        doctest::Approx(0.15));
  CHECK(eos_sound_speed_sq(EquationOfState::polytropic(0.1, 2.0), 1.2) ==
        doctest::Approx(0.15 / 1.3).epsilon(1e-12));
  CHECK(kind_of([] { eos_sound_speed_sq(EquationOfState::power_law(0.0, {{1.0, 1.5}}), 4.0); }) ==
        ErrorKind::Physicality);
}

TEST_CASE("equation of state derivatives match finite differences") {
  const EquationOfState list[] = {
      EquationOfState::power_law(0.1, {{0.3, 1.5}, {0.05, 2.5}}),
      EquationOfState::power_law(1.0 / 3.0, {{0.2, 0.5}, {0.1, 0.25}}),
      EquationOfState::polytropic(0.1, 3.0),
      EquationOfState::polytropic(0.4, 1.5),
  };
  for (const auto& eos : list) {
    for (double eps : {0.05, 0.7, 3.0, 40.0}) {
      CAPTURE(eos.describe());
      CAPTURE(eps);
      const double h = 1e-3 * eps;
      auto d = [&](double e) { return eos_derivatives(eos, e); };
      const auto c = d(eps);
      // fourth-order central differences
      auto diff = [&](auto get) {
        return (-get(d(eps + 2 * h)) + 8 * get(d(eps + h)) - 8 * get(d(eps - h)) +
                get(d(eps - 2 * h))) /
               (12 * h);
      };
      CHECK(c.fp == doctest::Approx(diff([](const EosDerivatives& x) { return x.f; })).epsilon(1e-8));
      CHECK(c.fpp == doctest::Approx(diff([](const EosDerivatives& x) { return x.fp; })).epsilon(1e-7));
      CHECK(c.fppp ==
            doctest::Approx(diff([](const EosDerivatives& x) { return x.fpp; })).epsilon(1e-6));
    }
  }
}

TEST_CASE("power law side detection and validation") {
  const auto lo = EquationOfState::power_law(0.0, {{1.0, 1.5}, {0.5, 2.0}});
  CHECK(std::get<PowerLawEos>(lo.variant()).side == ExpansionSide::LowDensity);
  const auto hi = EquationOfState::power_law(0.3, {{1.0, 0.5}, {0.5, 0.25}});
  CHECK(std::get<PowerLawEos>(hi.variant()).side == ExpansionSide::HighDensity);
  CHECK_THROWS_AS(EquationOfState::power_law(0.0, {{1.0, 1.5}, {1.0, 1.2}}), Error);
  CHECK_THROWS_AS(EquationOfState::power_law(0.0, {{1.0, 0.5}, {1.0, 1.5}}), Error);
  CHECK_THROWS_AS(EquationOfState::power_law(0.0, {{-1.0, 1.5}}), Error);
  CHECK_THROWS_AS(EquationOfState::linear(1.5), Error);
  CHECK_THROWS_AS(EquationOfState::polytropic(1.5, 2.0), Error);
  CHECK_THROWS_AS(EquationOfState::polytropic(0.1, 1.0), Error);
}

TEST_CASE("mass density") {
  CHECK(mass_density(EquationOfState::polytropic(0.1, 2.0), 1.0) == 1.0);
  CHECK(mass_density(EquationOfState::linear(0.0), 3.7) == doctest::Approx(3.7).epsilon(1e-15));
  CHECK(mass_density(EquationOfState::linear(1.0), 4.0) == doctest::Approx(2.0).epsilon(1e-15));
  // for the polytrope the parameter m obeys dm/m = d eps/(eps + p), so the
  // quadrature result is proportional to it
  const auto poly = EquationOfState::polytropic(0.1, 3.0);
  const auto& pp = std::get<PolytropicEos>(poly.variant());
  const double ratio0 = mass_density(poly, 1.0) / polytropic_parameter(pp, 1.0);
  for (double eps : {1e-4, 0.3, 5.0, 1e6}) {
    CAPTURE(eps);
    CHECK(mass_density(poly, eps) / polytropic_parameter(pp, eps) ==
          doctest::Approx(ratio0).epsilon(1e-11));
  }
}

TEST_CASE("linear closed form examples") {
  CHECK(background_closed_form_linear(0.0, 1.5, 2.0, 3.0).a == doctest::Approx(8.0));
  CHECK(background_closed_form_linear(1.0 / 3.0, 2.0, 1.0, 2.0).H == doctest::Approx(0.5));
  CHECK(background_closed_form_linear(0.6, 2.0, 1.7, 2.0).a == doctest::Approx(1.7));
  const auto s = background_closed_form_linear(0.2, 1.0, 1.0, 3.0);
  CHECK(s.H * s.H == doctest::Approx(s.a * s.a * s.eps).epsilon(1e-14));
}

TEST_CASE("linear background matches the closed form") {
  for (double w : {0.0, 1.0 / 9.0, 1.0 / 3.0, 1.0}) {
    CAPTURE(w);
    const double eta0 = 1.0, a0 = 1.0;
    const auto ref0 = background_closed_form_linear(w, eta0, a0, eta0);
    const auto tr =
        solve_background(EquationOfState::linear(w), eta0, a0, ref0.eps, {1e-2, 1e2}, 1e-12);
    double err = 0.0;
    for (const auto& s : tr.samples()) {
      const auto r = background_closed_form_linear(w, eta0, a0, s.eta);
      err = std::max({err, std::abs(s.a / r.a - 1.0), std::abs(s.H / r.H - 1.0),
                      std::abs(s.eps / r.eps - 1.0)});
    }
    CHECK(err < 1e-10);
    CHECK(tr.max_constraint_residual() <= 1e-11);
    const auto mid = tr.at(3.3);
    const auto r = background_closed_form_linear(w, eta0, a0, 3.3);
    CHECK(mid.a == doctest::Approx(r.a).epsilon(1e-10));
    // a(2 eta0) / a(eta0) = 2 for radiation
    if (w == 1.0 / 3.0) CHECK(tr.at(2.0).a / tr.at(1.0).a == doctest::Approx(2.0).epsilon(1e-10));
  }
}

TEST_CASE("density slope and m a^3 conservation") {
  const double w = 0.25;
  const auto tr = solve_background(EquationOfState::linear(w), 1.0, 1.0, 4.0 / 49.0 * 16.0,
                                   {0.1, 10.0}, 1e-12);
  const auto& s = tr.samples();
  const double slope = std::log(s.back().eps / s.front().eps) / std::log(s.back().eta / s.front().eta);
  CHECK(slope == doctest::Approx(-6.0 * (1.0 + w) / (1.0 + 3.0 * w)).epsilon(1e-9));

  const EquationOfState list[] = {EquationOfState::polytropic(0.1, 3.0),
                                  EquationOfState::power_law(0.0, {{1.0, 1.5}}),
                                  EquationOfState::power_law(0.2, {{0.5, 0.5}})};
  for (const auto& eos : list) {
    CAPTURE(eos.describe());
    const bool high = std::holds_alternative<PowerLawEos>(eos.variant()) &&
                      std::get<PowerLawEos>(eos.variant()).side == ExpansionSide::HighDensity;
    const double eps0 = high ? 1e4 : 0.05;
    const double e0 = singularity_conformal_time(eos, 1.0, eps0);
    const auto t = solve_background(eos, e0, 1.0, eps0, {0.5 * e0, 50.0 * e0}, 1e-11);
    const double c0 = t.samples().front().m * std::pow(t.samples().front().a, 3);
    double dev = 0.0;
    for (const auto& x : t.samples()) dev = std::max(dev, std::abs(x.m * std::pow(x.a, 3) / c0 - 1.0));
    CHECK(dev <= 100 * 1e-11);
    CHECK(t.max_constraint_residual() <= 10 * 1e-11);
    for (std::size_t i = 1; i < t.samples().size(); ++i) {
      CHECK(t.samples()[i].a >= t.samples()[i - 1].a);
      CHECK(t.samples()[i].eps <= t.samples()[i - 1].eps);
    }
  }
}

TEST_CASE("singularity conformal time") {
  const double eta0 = singularity_conformal_time(EquationOfState::linear(1.0 / 3.0), 2.0, 0.25);
  CHECK(eta0 == doctest::Approx(1.0));
  // a power law with vanishing corrections behaves like the linear case
  const double eta_pl =
      singularity_conformal_time(EquationOfState::power_law(0.2, {{1e-12, 0.5}}), 1.0, 1.0);
  CHECK(eta_pl == doctest::Approx(2.0 / 1.6).epsilon(1e-9));
  // polytrope: solving back toward eta -> 0 shows a -> 0 like eta^{2/(1+3/n)}
  const auto poly = EquationOfState::polytropic(0.1, 3.0);
  const double e0 = singularity_conformal_time(poly, 1.0, 1.0);
  const auto tr = solve_background(poly, e0, 1.0, 1.0, {1e-6 * e0, e0}, 1e-12);
  const double a1 = tr.at(1e-6 * e0).a, a2 = tr.at(1e-5 * e0).a;
  CHECK(std::log(a2 / a1) / std::log(10.0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(a1 < 1e-5);
}

TEST_CASE("regime classification") {
  CHECK(classify_regime(EquationOfState::power_law(0.2, {{1.0, 1.9}})).regime ==
        Regime::Underdamped);
  CHECK(classify_regime(EquationOfState::power_law(0.0, {{1.0, 4.0 / 3.0}})).regime ==
        Regime::Critical);
  CHECK(classify_regime(EquationOfState::power_law(0.0, {{1.0, 1.5}})).regime ==
        Regime::Overdamped);
  CHECK(classify_regime(EquationOfState::linear(0.3)).regime == Regime::Underdamped);
  CHECK(!classify_regime(EquationOfState::linear(0.3)).sigma);
  CHECK(kind_of([] { classify_regime(EquationOfState::linear(0.0)); }) == ErrorKind::Unsupported);
  CHECK(kind_of([] { classify_regime(EquationOfState::power_law(0.1, {{1.0, 0.5}})); }) ==
        ErrorKind::Domain);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double w = U(rng) < 0.5 ? 0.0 : U(rng);
    const double sigma = 0.01 + U(rng);
    const auto c = classify_regime(EquationOfState::power_law(w, {{1.0, 1.0 + sigma}}));
    const Regime expect = (w > 0.0 || sigma < 1.0 / 3.0) ? Regime::Underdamped : Regime::Overdamped;
    CHECK(c.regime == expect);
    CHECK(*c.sigma == doctest::Approx(sigma).epsilon(1e-14));
  }
}

TEST_CASE("tau time") {
  const double w = 0.3;
  const auto tr = tau_time(solve_background(EquationOfState::linear(w), 2.0, 1.0, 0.5, {1.0, 20.0}, 1e-12));
  for (const auto& s : tr.samples())
    CHECK(*s.tau == doctest::Approx(std::sqrt(w) * (s.eta - 2.0)).epsilon(1e-11));
  CHECK(!tr.tau_limit());
  CHECK(kind_of([] {
          tau_time(solve_background(EquationOfState::linear(0.0), 1.0, 1.0, 1.0, {1.0, 2.0}));
        }) == ErrorKind::Domain);

  // overdamped: tau - tau_inf ~ eta^{1 - 3 sigma}
  const double eps0 = 0.01;
  const double eta0 = 2.0 / std::sqrt(eps0);
  const auto od = tau_time(solve_background(EquationOfState::power_law(0.0, {{1.0, 1.5}}), eta0,
                                            1.0, eps0, {eta0, eta0 * 1e6}, 1e-12));
  REQUIRE(od.tau_limit());
  CHECK(od.tau_limit()->relative_change() < 0.01);
  const auto& s = od.samples();
  const double t_inf = od.tau_limit()->tau_inf;
  const double e1 = s[s.size() - 2000].eta, e2 = s.back().eta;
  const double slope = std::log((t_inf - *od.at(e2).tau) / (t_inf - *od.at(e1).tau)) /
                       std::log(e2 / e1);
  CHECK(slope == doctest::Approx(-0.5).epsilon(1e-3));

  // critical: tau grows like log eta
  const auto cr = tau_time(solve_background(EquationOfState::power_law(0.0, {{1.0, 4.0 / 3.0}}),
                                            eta0, 1.0, eps0, {eta0, eta0 * 1e8}, 1e-12));
  const double d1 = *cr.at(eta0 * 1e7).tau - *cr.at(eta0 * 1e6).tau;
  const double d2 = *cr.at(eta0 * 1e8).tau - *cr.at(eta0 * 1e7).tau;
  CHECK(d2 == doctest::Approx(d1).epsilon(1e-3));
}

TEST_CASE("tau coefficients") {
  const auto lin = tau_coefficients(EquationOfState::linear(0.4), 2.0);
  CHECK(std::abs(lin.Y) < 1e-16);
  CHECK(lin.Z == doctest::Approx(1.4));
  const double f1 = 0.7, sigma = 0.5, eps = 0.04;
  const auto pl = tau_coefficients(EquationOfState::power_law(0.0, {{f1, 1.0 + sigma}}), eps);
  CHECK(pl.Y == doctest::Approx(f1 * sigma * std::pow(eps, sigma)).epsilon(1e-13));
  const auto small = tau_coefficients(EquationOfState::power_law(0.0, {{f1, 1.0 + sigma}}), 1e-14);
  CHECK(small.Z == doctest::Approx(1.0 - sigma / 2.0).epsilon(1e-6));
  CHECK(kind_of([] { tau_coefficients(EquationOfState::linear(0.4), 0.0); }) == ErrorKind::Domain);
}

TEST_CASE("interpolation outside the range is an error") {
  const auto tr = solve_background(EquationOfState::linear(0.5), 1.0, 1.0, 1.0, {0.5, 2.0});
  CHECK(kind_of([&] { tr.at(3.0); }) == ErrorKind::Interpolation);
}
