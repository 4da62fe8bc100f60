#include "pertasym/background.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>

#include "pertasym/error.hpp"
#include "pertasym/ode.hpp"

namespace pertasym {

namespace {

constexpr double kSamplesPerUnit = 400.0;
constexpr double kLogLimit = 690.0;

struct Hermite {
  double y, dy;
};

Hermite hermite(double y0, double d0, double y1, double d1, double du, double t) {
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  const double g00 = 6 * t2 - 6 * t, g10 = 3 * t2 - 4 * t + 1;
  const double g01 = -6 * t2 + 6 * t, g11 = 3 * t2 - 2 * t;
  return {h00 * y0 + h10 * du * d0 + h01 * y1 + h11 * du * d1,
          (g00 * y0 + g10 * du * d0 + g01 * y1 + g11 * du * d1) / du};
}

double kappa_of(double G) { return 8.0 * std::numbers::pi * G / 3.0; }

}  // namespace

const char* to_string(Regime r) {
  switch (r) {
    case Regime::Underdamped: return "underdamped";
    case Regime::Critical: return "critical";
    case Regime::Overdamped: return "overdamped";
  }
  return "?";
}

double TauLimit::relative_change() const {
  return std::abs(tau_inf_doubled - tau_inf) / std::abs(tau_inf);
}

double BackgroundTrajectory::kappa() const { return kappa_of(G_); }

double BackgroundTrajectory::eta_min() const { return samples_.front().eta; }
double BackgroundTrajectory::eta_max() const { return samples_.back().eta; }

std::size_t BackgroundTrajectory::locate(double u, double& t) const {
  const double u_last = u_first_ + du_ * static_cast<double>(lna_.size() - 1);
  const double slack = 1e-12 * std::max(1.0, std::abs(u));
  if (!(u >= u_first_ - slack && u <= u_last + slack)) {
    std::ostringstream os;
    os << "eta = " << std::exp(u) << " outside background range [" << eta_min() << ", "
       << eta_max() << "]";
    fail(ErrorKind::Interpolation, os.str());
  }
  const double x = (u - u_first_) / du_;
  std::size_t i = static_cast<std::size_t>(std::clamp(std::floor(x), 0.0,
                                                      static_cast<double>(lna_.size() - 2)));
  t = std::clamp(x - static_cast<double>(i), 0.0, 1.0);
  return i;
}

BackgroundTrajectory::Raw BackgroundTrajectory::raw(double eta) const {
  double t = 0.0;
  const std::size_t i = locate(std::log(eta), t);
  const auto a = hermite(lna_[i], dlna_[i], lna_[i + 1], dlna_[i + 1], du_, t);
  const auto h = hermite(h_[i], dh_[i], h_[i + 1], dh_[i + 1], du_, t);
  const auto e = hermite(lneps_[i], dlneps_[i], lneps_[i + 1], dlneps_[i + 1], du_, t);
  return {a.y, h.y, e.y, a.dy, h.dy, e.dy};
}

BackgroundState BackgroundTrajectory::at(double eta) const {
  double t = 0.0;
  const std::size_t i = locate(std::log(eta), t);
  BackgroundState s;
  s.eta = eta;
  s.a = std::exp(hermite(lna_[i], dlna_[i], lna_[i + 1], dlna_[i + 1], du_, t).y);
  s.H = hermite(h_[i], dh_[i], h_[i + 1], dh_[i + 1], du_, t).y / eta;
  s.eps = std::exp(hermite(lneps_[i], dlneps_[i], lneps_[i + 1], dlneps_[i + 1], du_, t).y);
  s.m = std::exp(hermite(lnm_[i], dlnm_[i], lnm_[i + 1], dlnm_[i + 1], du_, t).y);
  if (!tau_.empty()) s.tau = hermite(tau_[i], dtau_[i], tau_[i + 1], dtau_[i + 1], du_, t).y;
  return s;
}

double BackgroundTrajectory::max_constraint_residual() const {
  double r = 0.0;
  for (const auto& s : samples_)
    r = std::max(r, std::abs(s.H * s.H - kappa() * s.a * s.a * s.eps) / (s.H * s.H));
  return r;
}

BackgroundTrajectory solve_background(const EquationOfState& eos, double eta0, double a0,
                                      double eps0, std::pair<double, double> eta_range,
                                      double tol, double G) {
  const auto [lo, hi] = eta_range;
  if (!(lo > 0.0 && hi > lo && std::isfinite(hi)))
    fail(ErrorKind::Domain, "eta range must satisfy 0 < lo < hi");
  if (!(eta0 >= lo && eta0 <= hi)) fail(ErrorKind::Domain, "eta0 must lie inside the range");
  if (!(a0 > 0.0)) fail(ErrorKind::Domain, "a0 must be > 0");
  if (!(eps0 > 0.0)) fail(ErrorKind::Domain, "eps0 must be > 0");
  if (!(G > 0.0)) fail(ErrorKind::Domain, "G must be > 0");
  if (!(tol > 0.0 && tol < 1e-2)) fail(ErrorKind::Domain, "tolerance must be in (0, 1e-2)");

  BackgroundTrajectory tr;
  tr.eos_ = eos;
  tr.G_ = G;
  tr.eta0_ = eta0;
  const double kappa = kappa_of(G);

  const double u_lo = std::log(lo), u_hi = std::log(hi), u0 = std::log(eta0);
  const std::size_t count =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil((u_hi - u_lo) * kSamplesPerUnit)) + 1);
  tr.u_first_ = u_lo;
  tr.du_ = (u_hi - u_lo) / static_cast<double>(count - 1);

  // y = (ln a, h = eta H, ln eps). With C = h^2 - kappa eta^2 a^2 eps the
  // plain second Friedmann equation gives dC/du = 2C, which decays when
  // integrating toward small eta; forward legs add 2(hc^2 - h^2)/h to dh/du,
  // which turns this into dC/du = -2C.
  using Y = ode::State<3>;
  bool damp = true;
  auto rhs = [&](double u, const Y& y) -> Y {
    const double h = y[1];
    const double hc2 = kappa * std::exp(2.0 * u + 2.0 * y[0] + y[2]);
    const double eps = std::exp(y[2]);
    const double r = eos_pressure(eos, eps) / eps;
    const double dh = h - 0.5 * hc2 * (1.0 + 3.0 * r) + (damp ? 2.0 * (hc2 - h * h) / h : 0.0);
    return {h, dh, -3.0 * h * (1.0 + r)};
  };
  const Y y0{std::log(a0), eta0 * a0 * std::sqrt(kappa * eps0), std::log(eps0)};

  std::vector<Y> ys(count), dys(count);
  std::vector<double> us(count);
  for (std::size_t j = 0; j < count; ++j)
    us[j] = j + 1 == count ? u_hi : u_lo + tr.du_ * static_cast<double>(j);

  ode::Options opt;
  opt.rtol = tol;
  opt.atol = tol;
  // logarithms get absolute control, which is relative control on a and eps
  auto scale = [tol](double, const Y& y, const Y& yn) -> Y {
    return {tol, tol * std::max({1.0, std::abs(y[1]), std::abs(yn[1])}), tol};
  };
  double last_valid = eta0;
  auto record = [&](std::size_t base, bool forward) {
    return [&, base, forward](std::size_t k, double u, const Y& y) {
      const std::size_t j = forward ? base + k : base - k;
      for (double v : y)
        if (!std::isfinite(v)) fail(ErrorKind::Stiffness, "non-finite state");
      if (std::abs(y[0]) > kLogLimit || std::abs(y[2]) > kLogLimit || !(y[1] > 0.0))
        fail(ErrorKind::Stiffness, "degenerate background");
      ys[j] = y;
      dys[j] = rhs(u, y);
      last_valid = std::exp(u);
    };
  };
  const std::size_t split = static_cast<std::size_t>(
      std::lower_bound(us.begin(), us.end(), u0) - us.begin());
  try {
    if (split < count)
      ode::integrate<3>(rhs, u0, y0, std::span<const double>(us.data() + split, count - split),
                        opt, scale, record(split, true));
    last_valid = eta0;
    damp = false;
    if (split > 0) {
      std::vector<double> back(us.rend() - static_cast<std::ptrdiff_t>(split), us.rend());
      ode::integrate<3>(rhs, u0, y0, back, opt, scale, record(split - 1, false));
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Stiffness && e.kind() != ErrorKind::Physicality &&
        e.kind() != ErrorKind::Numeric && e.kind() != ErrorKind::Domain)
      throw;
    std::ostringstream os;
    os << "background reached a singularity (a or eps degenerate) after eta = " << last_valid
       << ": " << e.what();
    fail(ErrorKind::Singularity, os.str());
  }

  tr.lna_.resize(count);
  tr.h_.resize(count);
  tr.lneps_.resize(count);
  tr.dlna_.resize(count);
  tr.dh_.resize(count);
  tr.dlneps_.resize(count);
  for (std::size_t j = 0; j < count; ++j) {
    tr.lna_[j] = ys[j][0];
    tr.h_[j] = ys[j][1];
    tr.lneps_[j] = ys[j][2];
    tr.dlna_[j] = dys[j][0];
    tr.dh_[j] = dys[j][1];
    tr.dlneps_[j] = dys[j][2];
  }

  // ln m along the grid: one adaptive evaluation, then Gauss increments
  tr.lnm_.resize(count);
  tr.dlnm_.resize(count);
  auto g = [&](double s) {
    const double xi = std::exp(s);
    return xi / (xi + eos_pressure(eos, xi));
  };
  tr.lnm_[0] = std::log(mass_density(eos, std::exp(tr.lneps_[0])));
  for (std::size_t j = 0; j < count; ++j) {
    tr.dlnm_[j] = tr.dlneps_[j] * g(tr.lneps_[j]);
    if (j == 0) continue;
    tr.lnm_[j] = tr.lnm_[j - 1] +
                 boost::math::quadrature::gauss<double, 10>::integrate(g, tr.lneps_[j - 1],
                                                                       tr.lneps_[j]);
  }

  tr.samples_.resize(count);
  for (std::size_t j = 0; j < count; ++j) {
    auto& s = tr.samples_[j];
    s.eta = std::exp(us[j]);
    s.a = std::exp(tr.lna_[j]);
    s.H = tr.h_[j] / s.eta;
    s.eps = std::exp(tr.lneps_[j]);
    s.m = std::exp(tr.lnm_[j]);
  }
  return tr;
}

BackgroundState background_closed_form_linear(double w, double eta0, double a0, double eta,
                                              double G) {
  if (!(w >= 0.0 && w <= 1.0)) fail(ErrorKind::Domain, "w must be in [0,1]");
  if (!(eta > 0.0 && eta0 > 0.0 && a0 > 0.0)) fail(ErrorKind::Domain, "eta, eta0, a0 must be > 0");
  BackgroundState s;
  s.eta = eta;
  s.a = a0 * std::pow(eta / eta0, 2.0 / (1.0 + 3.0 * w));
  s.H = 2.0 / ((1.0 + 3.0 * w) * eta);
  s.eps = s.H * s.H / (kappa_of(G) * s.a * s.a);
  s.m = std::pow(s.eps, 1.0 / (1.0 + w));
  return s;
}

double singularity_conformal_time(const EquationOfState& eos, double a0, double eps0, double G) {
  if (!(a0 > 0.0 && eps0 > 0.0)) fail(ErrorKind::Domain, "a0 and eps0 must be > 0");
  const double kappa = kappa_of(G);
  if (const auto* l = std::get_if<LinearEos>(&eos.variant()))
    return 2.0 / ((1.0 + 3.0 * l->w) * a0 * std::sqrt(kappa * eps0));
  // d eta = d eps / (-3 H (eps + f)) with H = a sqrt(kappa eps) and a ~ m^{-1/3}.
  // In s = ln(eps / eps0) integrate (eta, ln m) jointly out to s_max, where the
  // integrand has decayed geometrically, and add the geometric tail.
  const double lnm0 = std::log(mass_density(eos, eps0));
  auto integrand = [&](double s, double lnm) {
    const double eps = eps0 * std::exp(s);
    const double f = eos_pressure(eos, eps);
    const double a = a0 * std::exp((lnm0 - lnm) / 3.0);
    return std::make_pair(eps / (3.0 * a * std::sqrt(kappa * eps) * (eps + f)), eps / (eps + f));
  };
  using Y = ode::State<2>;
  auto rhs = [&](double s, const Y& y) -> Y {
    const auto [d_eta, d_lnm] = integrand(s, y[1]);
    return {d_eta, d_lnm};
  };
  constexpr double kSMax = 240.0;
  const double touts[] = {kSMax - 1.0, kSMax};
  Y at[2];
  ode::Options opt;
  opt.rtol = 1e-13;
  opt.atol = 1e-15;
  ode::integrate<2>(rhs, 0.0, Y{0.0, lnm0}, touts, opt, ode::MixedScale<2>{1e-13, 1e-15},
                    [&](std::size_t k, double, const Y& y) { at[k] = y; });
  const double g1 = integrand(kSMax - 1.0, at[0][1]).first;
  const double g2 = integrand(kSMax, at[1][1]).first;
  const double rate = std::log(g1 / g2);
  if (!(rate > 0.0) || !std::isfinite(at[1][0]))
    fail(ErrorKind::Numeric, "singularity conformal time integral does not converge");
  return at[1][0] + g2 / rate;
}

RegimeClass classify_regime(const EquationOfState& eos) {
  constexpr double kSigmaTol = 1e-12;
  auto by_sigma = [](double w, double sigma) {
    RegimeClass c;
    c.sigma = sigma;
    if (w > 0.0 || sigma < 1.0 / 3.0 - kSigmaTol)
      c.regime = Regime::Underdamped;
    else if (sigma <= 1.0 / 3.0 + kSigmaTol)
      c.regime = Regime::Critical;
    else
      c.regime = Regime::Overdamped;
    return c;
  };
  if (const auto* l = std::get_if<LinearEos>(&eos.variant())) {
    if (l->w == 0.0)
      fail(ErrorKind::Unsupported, "pure dust has no late-time sigma and is unclassifiable");
    return RegimeClass{Regime::Underdamped, std::nullopt};
  }
  if (const auto* p = std::get_if<PowerLawEos>(&eos.variant())) {
    if (p->side != ExpansionSide::LowDensity)
      fail(ErrorKind::Domain, "classification needs a low-density power law (exponents > 1)");
    return by_sigma(p->w, p->terms.front().a - 1.0);
  }
  // polytropic: f = K eps^{1 + 1/n} + ... at low density
  const auto& pt = std::get<PolytropicEos>(eos.variant());
  return by_sigma(0.0, 1.0 / pt.n);
}

BackgroundTrajectory tau_time(const BackgroundTrajectory& traj) {
  const auto& eos = traj.eos();
  if (eos.is_dust()) fail(ErrorKind::Domain, "tau is undefined for dust (vanishing sound speed)");
  BackgroundTrajectory out = traj;
  const std::size_t n = traj.lna_.size();
  // d tau / du = eta sqrt(f'(eps))
  auto integrand = [&](double u) {
    const double eps = std::exp(traj.raw(std::exp(u)).lneps);
    return std::exp(u) * std::sqrt(eos_sound_speed_sq(eos, eps));
  };
  std::vector<double> tau(n), dtau(n);
  std::vector<double> us(n);
  for (std::size_t j = 0; j < n; ++j) {
    us[j] = std::log(traj.samples_[j].eta);
    dtau[j] = traj.samples_[j].eta * std::sqrt(eos_sound_speed_sq(eos, traj.samples_[j].eps));
    if (!(dtau[j] > 0.0)) fail(ErrorKind::Domain, "tau needs f' > 0 along the trajectory");
  }
  using GL = boost::math::quadrature::gauss<double, 10>;
  tau[0] = 0.0;
  for (std::size_t j = 1; j < n; ++j) tau[j] = tau[j - 1] + GL::integrate(integrand, us[j - 1], us[j]);
  // anchor tau(eta0) = 0
  const double u0 = std::log(traj.eta0_);
  std::size_t i0 = static_cast<std::size_t>(std::upper_bound(us.begin(), us.end(), u0) - us.begin());
  i0 = std::clamp<std::size_t>(i0, 1, n) - 1;
  const double tau0 = tau[i0] + GL::integrate(integrand, us[i0], u0);
  for (auto& t : tau) t -= tau0;
  out.tau_ = tau;
  out.dtau_ = dtau;
  for (std::size_t j = 0; j < n; ++j) out.samples_[j].tau = tau[j];

  std::optional<RegimeClass> rc;
  try {
    rc = classify_regime(eos);
  } catch (const Error&) {
  }
  if (rc && rc->regime == Regime::Overdamped) {
    const double sigma = *rc->sigma;
    auto fit = [&](double decades, double& coef) {
      const double eta_lo = traj.eta_max() * std::pow(10.0, -decades);
      std::vector<std::size_t> rows;
      for (std::size_t j = 0; j < n; ++j)
        if (traj.samples_[j].eta >= eta_lo) rows.push_back(j);
      if (rows.size() < 3)
        fail(ErrorKind::Inconclusive, "too few samples to extrapolate tau_inf");
      Eigen::MatrixXd A(rows.size(), 2);
      Eigen::VectorXd b(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        A(r, 0) = 1.0;
        A(r, 1) = std::pow(traj.samples_[rows[r]].eta, 1.0 - 3.0 * sigma);
        b(r) = tau[rows[r]];
      }
      const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
      coef = x(1);
      return x(0);
    };
    TauLimit lim;
    double c2 = 0.0;
    lim.tau_inf = fit(1.0, lim.coefficient);
    lim.tau_inf_doubled = fit(2.0, c2);
    out.tau_limit_ = lim;
  }
  return out;
}

void write_background_csv(const BackgroundTrajectory& traj, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "cannot open " + path + " for writing");
  os << "eta,a,H,eps,m,tau\n";
  char buf[256];
  for (const auto& s : traj.samples()) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,", s.eta, s.a, s.H, s.eps, s.m);
    os << buf;
    if (s.tau) {
      std::snprintf(buf, sizeof buf, "%.17g", *s.tau);
      os << buf;
    }
    os << '\n';
  }
  if (!os) fail(ErrorKind::Io, "failed writing " + path);
}

}  // namespace pertasym
