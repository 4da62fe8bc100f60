#include "pertasym/evolver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pertasym/error.hpp"
#include "pertasym/io.hpp"
#include "pertasym/kernels.hpp"
#include "pertasym/ode.hpp"
#include "pertasym/parallel.hpp"

namespace pertasym {

double nu_index(double w) {
  if (!(w >= 0.0 && w <= 1.0)) fail(ErrorKind::Domain, "w must be in [0,1]");
  return 0.5 * (5.0 + 3.0 * w) / (1.0 + 3.0 * w);
}

ModeVec mode_rhs_linear(double w, double k2, double eta, ModeVec u) {
  if (!(eta > 0.0)) fail(ErrorKind::Domain, "mode equation needs eta > 0");
  const double friction = 6.0 * (1.0 + w) / (1.0 + 3.0 * w);
  return {u[1], -friction * u[1] / eta - w * k2 * u[0]};
}

ModeVec mode_rhs_general(const BackgroundTrajectory& bg, double k2, double eta, ModeVec u) {
  if (!(eta > 0.0)) fail(ErrorKind::Domain, "mode equation needs eta > 0");
  const auto r = bg.raw(eta);
  const double H = r.h / eta;
  const double eps = std::exp(r.lneps);
  const auto d = eos_derivatives(bg.eos(), eps);
  return {u[1], -3.0 * (1.0 + d.fp) * H * u[1] - 3.0 * (d.fp - d.f / eps) * H * H * u[0] -
                    d.fp * k2 * u[0]};
}

WaveModel WaveModel::linear(double w) {
  nu_index(w);
  WaveModel m;
  m.w_ = w;
  return m;
}

WaveModel WaveModel::general(std::shared_ptr<const BackgroundTrajectory> bg) {
  if (!bg) fail(ErrorKind::Domain, "general model needs a background");
  WaveModel m;
  m.w_ = bg->eos().limiting_w();
  m.bg_ = std::move(bg);
  return m;
}

ModeVec WaveModel::rhs(double k2, double eta, ModeVec u) const {
  return bg_ ? mode_rhs_general(*bg_, k2, eta, u) : mode_rhs_linear(w_, k2, eta, u);
}

double WaveModel::wave_speed_sq(double eta) const {
  if (!bg_) return w_;
  return eos_derivatives(bg_->eos(), std::exp(bg_->raw(eta).lneps)).fp;
}

namespace {

// u = A + B eta^{-2 nu}
Transfer closed_form_homogeneous(double nu, double eta0, double eta) {
  const double x = 2.0 * nu * std::log(eta0 / eta);
  Transfer t;
  t.m00 = 1.0;
  t.m01 = -eta0 / (2.0 * nu) * std::expm1(x);
  t.m10 = 0.0;
  t.m11 = std::exp(x) * eta0 / eta;
  return t;
}

std::vector<Transfer> integrate_transfers(const WaveModel& model, double k2, double eta0,
                                          std::span<const double> etas, const EvolveOptions& opt) {
  std::vector<Transfer> out(etas.size());
  std::vector<std::size_t> fwd, bwd;
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (!(etas[i] > 0.0)) fail(ErrorKind::Domain, "target times must be > 0");
    (etas[i] >= eta0 ? fwd : bwd).push_back(i);
  }
  std::sort(fwd.begin(), fwd.end(), [&](auto a, auto b) { return etas[a] < etas[b]; });
  std::sort(bwd.begin(), bwd.end(), [&](auto a, auto b) { return etas[a] > etas[b]; });

  // columns (u, u') starting from (1, 0) and (0, 1), integrated in u = ln eta
  using Y = ode::State<4>;
  auto rhs = [&](double s, const Y& y) -> Y {
    const double eta = std::exp(s);
    const ModeVec a = model.rhs(k2, eta, {y[0], y[1]});
    const ModeVec b = model.rhs(k2, eta, {y[2], y[3]});
    return {eta * a[0], eta * a[1], eta * b[0], eta * b[1]};
  };
  // amplitude norm sqrt(u^2 + (u'/kappa)^2) with kappa the local frequency
  const double tol = opt.tol;
  auto scale = [&](double s, const Y& y, const Y& yn) -> Y {
    const double eta = std::exp(s);
    const double kap = std::sqrt(model.wave_speed_sq(eta) * k2 + 1.0 / (eta * eta));
    Y sc;
    for (int c = 0; c < 2; ++c) {
      const double r = std::max(std::hypot(y[2 * c], y[2 * c + 1] / kap),
                                std::hypot(yn[2 * c], yn[2 * c + 1] / kap));
      const double v = tol * r + 1e-300;
      sc[2 * c] = v;
      sc[2 * c + 1] = kap * v;
    }
    return sc;
  };
  ode::Options o;
  o.rtol = tol;
  o.atol = 0.0;
  for (const auto* list : {&fwd, &bwd}) {
    if (list->empty()) continue;
    std::vector<double> us(list->size());
    for (std::size_t j = 0; j < list->size(); ++j) us[j] = std::log(etas[(*list)[j]]);
    ode::integrate<4>(rhs, std::log(eta0), Y{1.0, 0.0, 0.0, 1.0}, us, o, scale,
                      [&](std::size_t j, double, const Y& y) {
                        out[(*list)[j]] = Transfer{y[0], y[2], y[1], y[3]};
                      });
  }
  return out;
}

}  // namespace

std::vector<Transfer> mode_transfers(const WaveModel& model, double k2, double eta0,
                                     std::span<const double> etas, const EvolveOptions& opt) {
  if (!(eta0 > 0.0)) fail(ErrorKind::Domain, "initial time must be > 0");
  if (model.is_linear() && (k2 == 0.0 || model.w() == 0.0)) {
    const double nu = nu_index(model.w());
    std::vector<Transfer> out(etas.size());
    for (std::size_t i = 0; i < etas.size(); ++i) {
      if (!(etas[i] > 0.0)) fail(ErrorKind::Domain, "target times must be > 0");
      out[i] = closed_form_homogeneous(nu, eta0, etas[i]);
    }
    return out;
  }
  try {
    return integrate_transfers(model, k2, eta0, etas, opt);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Stiffness) throw;
    std::ostringstream os;
    os << "mode with |k|^2 = " << k2 << ": " << e.what();
    fail(ErrorKind::Stiffness, os.str());
  }
}

namespace {

struct ShellPlan {
  Shells shells;
  std::vector<std::size_t> active;  // shell ids that need integrating
};

ShellPlan plan_shells(const TorusGeometry& g, const std::vector<bool>& used) {
  ShellPlan p{make_shells(g), {}};
  std::vector<bool> need(p.shells.n2.size(), false);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (used[i]) need[p.shells.of[i]] = true;
  for (std::size_t s = 0; s < need.size(); ++s)
    if (need[s]) p.active.push_back(s);
  return p;
}

// transfers[shell][time]
std::vector<std::vector<Transfer>> shell_transfers(const ShellPlan& plan, const TorusGeometry& g,
                                                   const WaveModel& model, double eta0,
                                                   std::span<const double> etas,
                                                   const EvolveOptions& opt) {
  std::vector<std::vector<Transfer>> tr(plan.shells.n2.size());
  const double ks2 = g.kscale() * g.kscale();
  parallel_for(plan.active.size(), [&](std::size_t j) {
    const std::size_t s = plan.active[j];
    tr[s] = mode_transfers(model, ks2 * plan.shells.n2[s], eta0, etas, opt);
  });
  return tr;
}

void check_state(const PerturbationState& state) {
  if (!(state.phi.geometry() == state.dphi.geometry()))
    fail(ErrorKind::Domain, "phi and dphi must share one geometry");
  if (!(state.eta > 0.0)) fail(ErrorKind::Domain, "state time must be > 0");
}

}  // namespace

std::vector<std::size_t> active_modes(const PerturbationState& state) {
  const auto& g = state.phi.geometry();
  std::vector<std::size_t> out;
  for (std::size_t i = g.center(); i < g.size(); ++i)
    if (state.phi.re()[i] != 0.0 || state.phi.im()[i] != 0.0 || state.dphi.re()[i] != 0.0 ||
        state.dphi.im()[i] != 0.0)
      out.push_back(i);
  return out;
}

std::vector<PerturbationState> evolve_snapshots(const PerturbationState& state,
                                                const WaveModel& model,
                                                std::span<const double> etas,
                                                const EvolveOptions& opt) {
  check_state(state);
  const auto& g = state.phi.geometry();
  std::vector<bool> used(g.size(), false);
  for (std::size_t i : active_modes(state)) used[i] = used[g.mirror(i)] = true;
  const ShellPlan plan = plan_shells(g, used);
  const auto tr = shell_transfers(plan, g, model, state.eta, etas, opt);

  std::vector<PerturbationState> out;
  out.reserve(etas.size());
  const std::size_t n = g.size();
  std::vector<double> m00(n), m01(n), m10(n), m11(n);
  const auto& k = kernels::active();
  for (std::size_t t = 0; t < etas.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& shell = tr[plan.shells.of[i]];
      const Transfer m = shell.empty() ? Transfer{} : shell[t];
      m00[i] = m.m00;
      m01[i] = m.m01;
      m10[i] = m.m10;
      m11[i] = m.m11;
    }
    PerturbationState s{etas[t], state.phi, state.dphi};
    k.transfer_apply(n, m00.data(), m01.data(), m10.data(), m11.data(), s.phi.re().data(),
                     s.dphi.re().data());
    k.transfer_apply(n, m00.data(), m01.data(), m10.data(), m11.data(), s.phi.im().data(),
                     s.dphi.im().data());
    out.push_back(std::move(s));
  }
  return out;
}

PerturbationState evolve(const PerturbationState& state, const WaveModel& model, double eta_target,
                         const EvolveOptions& opt) {
  const double t[] = {eta_target};
  return std::move(evolve_snapshots(state, model, t, opt).front());
}

ModeTracks track_modes(const PerturbationState& state, const WaveModel& model,
                       std::span<const double> etas, std::span<const std::size_t> modes,
                       const EvolveOptions& opt) {
  check_state(state);
  const auto& g = state.phi.geometry();
  std::vector<bool> used(g.size(), false);
  for (std::size_t i : modes) {
    if (i >= g.size()) fail(ErrorKind::Domain, "mode index out of range");
    used[i] = true;
  }
  const ShellPlan plan = plan_shells(g, used);
  const auto tr = shell_transfers(plan, g, model, state.eta, etas, opt);
  ModeTracks mt;
  mt.geometry = g;
  mt.eta.assign(etas.begin(), etas.end());
  mt.modes.assign(modes.begin(), modes.end());
  mt.phi.resize(modes.size());
  mt.dphi.resize(modes.size());
  for (std::size_t j = 0; j < modes.size(); ++j) {
    const std::size_t i = modes[j];
    const auto& shell = tr[plan.shells.of[i]];
    const std::complex<double> p = state.phi.at(i), q = state.dphi.at(i);
    mt.phi[j].resize(etas.size());
    mt.dphi[j].resize(etas.size());
    for (std::size_t t = 0; t < etas.size(); ++t) {
      const Transfer& m = shell[t];
      mt.phi[j][t] = m.m00 * p + m.m01 * q;
      mt.dphi[j][t] = m.m10 * p + m.m11 * q;
    }
  }
  return mt;
}

namespace {

void check_background_time(const PerturbationState& s, const BackgroundState& bg) {
  if (std::abs(bg.eta - s.eta) > 1e-12 * s.eta)
    fail(ErrorKind::Precondition, "background state is not at the perturbation time");
  if (!(bg.H > 0.0 && bg.a > 0.0)) fail(ErrorKind::Domain, "background needs H > 0 and a > 0");
}

}  // namespace

SpectralField density_contrast(const PerturbationState& state, const BackgroundState& bg) {
  check_background_time(state, bg);
  SpectralField out = laplacian(state.phi);
  out *= 2.0 / (3.0 * bg.H * bg.H);
  out.axpy(-2.0, state.phi);
  out.axpy(-2.0 / bg.H, state.dphi);
  return out;
}

SpectralField delta_epsilon(const PerturbationState& state, const BackgroundState& bg, double G) {
  check_background_time(state, bg);
  SpectralField out = laplacian(state.phi);
  out.axpy(-3.0 * bg.H, state.dphi);
  out.axpy(-3.0 * bg.H * bg.H, state.phi);
  out *= 1.0 / (4.0 * std::numbers::pi * G * bg.a * bg.a);
  return out;
}

namespace {

std::vector<double> k2_table(const TorusGeometry& g) {
  std::vector<double> k2(g.size());
  for (std::size_t i = 0; i < k2.size(); ++i) k2[i] = g.k2(i);
  return k2;
}

double energy_of(const SpectralField& u, const SpectralField& du, double w) {
  const auto& g = u.geometry();
  const auto k2 = k2_table(g);
  const auto& k = kernels::active();
  const double kin = k.weighted_norm2(g.size(), nullptr, du.re().data(), du.im().data());
  const double grad = k.weighted_norm2(g.size(), k2.data(), u.re().data(), u.im().data());
  return 0.5 * g.volume() * (kin + w * grad);
}

}  // namespace

EnergyE1 energy_E1(const PerturbationState& state, double w) {
  const double nu = nu_index(w);
  EnergyE1 e;
  e.E1 = energy_of(state.phi, state.dphi, w);
  e.weighted = std::pow(state.eta, 2.0 * (2.0 * nu + 1.0)) * e.E1;
  return e;
}

double psi_energy_E3(const PerturbationState& state, double w) {
  const double scale = std::sqrt(state.phi.norm2() + state.dphi.norm2());
  const double c0 = std::abs(state.phi.mean()) + std::abs(state.dphi.mean());
  if (c0 > 1e-13 * scale) fail(ErrorKind::Precondition, "E3 needs zero-mean data");
  const double nu = nu_index(w);
  const double p = std::pow(state.eta, nu + 0.5);
  SpectralField psi = p * state.phi;
  SpectralField dpsi = p * state.dphi;
  dpsi.axpy((nu + 0.5) * p / state.eta, state.phi);
  return energy_of(psi, dpsi, w);
}

void write_snapshots(const std::vector<PerturbationState>& snaps, double w, const std::string& dir) {
  ensure_directory(dir);
  CsvWriter csv(dir + "/energy.csv", "eta,E1,weightedE1,E3,mean_phi");
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const auto& s = snaps[i];
    char name[64];
    std::snprintf(name, sizeof name, "/snap_%04zu", i);
    write_field(s.phi, dir + name + "_phi.json");
    write_field(s.dphi, dir + name + "_dphi.json");
    const auto e = energy_E1(s, w);
    PerturbationState zm{s.eta, zero_mean_split(s.phi).second, zero_mean_split(s.dphi).second};
    csv << s.eta << e.E1 << e.weighted << psi_energy_E3(zm, w) << s.phi.mean();
    csv.end_row();
  }
  csv.close();
}

}  // namespace pertasym
