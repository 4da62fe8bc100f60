#include "pertasym/latetime.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <complex>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <set>
#include <sstream>

#include "pertasym/eos.hpp"
#include "pertasym/error.hpp"
#include "pertasym/io.hpp"
#include "pertasym/parallel.hpp"

namespace pertasym {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

void check_zero_mean(const SpectralField& f, const char* what) {
  const std::size_t c = f.geometry().center();
  if (f.re()[c] != 0.0 || f.im()[c] != 0.0)
    fail(ErrorKind::Precondition, std::string(what) + " has a nonzero mean; psi is defined for zero-mean states");
}

std::string fmt_k(std::array<int, 3> k) {
  std::ostringstream os;
  os << "(" << k[0] << "," << k[1] << "," << k[2] << ")";
  return os.str();
}

std::array<int, 3> neg(std::array<int, 3> k) { return {-k[0], -k[1], -k[2]}; }

// Least squares with column equilibration; returns coefficients.
Eigen::VectorXd lsq(Eigen::MatrixXd A, const Eigen::VectorXd& b) {
  Eigen::VectorXd cs(A.cols());
  for (Eigen::Index c = 0; c < A.cols(); ++c) {
    cs(c) = A.col(c).norm();
    if (cs(c) == 0.0) cs(c) = 1.0;
    A.col(c) /= cs(c);
  }
  Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
  return x.cwiseQuotient(cs);
}

// One real track sampled in time with its derivative.
struct RealTrack {
  std::array<int, 3> key{};
  std::vector<double> v, dv;
};

// Splits tracked complex coefficients of the upper half into cos and sin
// amplitudes: Phi_k e^{ikx} + c.c. = 2 Re Phi_k cos(kx) - 2 Im Phi_k sin(kx).
struct SplitTracks {
  std::vector<std::size_t> index;  // upper-half cube index per pair
  std::vector<RealTrack> cos_part, sin_part;
  std::optional<std::size_t> mean_slot;
};

SplitTracks split_tracks(const ModeTracks& tr) {
  const auto& g = tr.geometry;
  const std::size_t c = g.center(), nt = tr.eta.size();
  SplitTracks out;
  std::set<std::size_t> seen;
  for (std::size_t m = 0; m < tr.modes.size(); ++m) {
    const std::size_t i = tr.modes[m];
    if (i == c) {
      out.mean_slot = m;
      continue;
    }
    const bool upper = i > c;
    const std::size_t u = upper ? i : g.mirror(i);
    if (!seen.insert(u).second) continue;
    RealTrack ct, st;
    ct.key = g.wavenumber(u);
    st.key = neg(ct.key);
    ct.v.resize(nt);
    ct.dv.resize(nt);
    st.v.resize(nt);
    st.dv.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) {
      cd p = tr.phi[m][t], dp = tr.dphi[m][t];
      if (!upper) {
        p = std::conj(p);
        dp = std::conj(dp);
      }
      ct.v[t] = 2.0 * p.real();
      ct.dv[t] = 2.0 * dp.real();
      st.v[t] = -2.0 * p.imag();
      st.dv[t] = -2.0 * dp.imag();
    }
    out.index.push_back(u);
    out.cos_part.push_back(std::move(ct));
    out.sin_part.push_back(std::move(st));
  }
  return out;
}

std::optional<ProfileMode> fit_polar(const ModePolarTrack& p, double omega) {
  const std::size_t n = p.time.size();
  const double tmax = p.time.back();
  Eigen::MatrixXd Ar(n, 2), At(n, 3);
  Eigen::VectorXd br(n), bt(n), bt2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = p.time[i];
    Ar(i, 0) = 1.0;
    Ar(i, 1) = tmax / t;
    br(i) = p.r[i];
    At(i, 0) = 1.0;
    At(i, 1) = t / tmax;
    At(i, 2) = tmax / t;
    bt(i) = p.theta[i];
    bt2(i) = p.theta[i] + omega * t;
  }
  const Eigen::VectorXd xr = lsq(Ar, br);
  ProfileMode m;
  m.k = p.k;
  m.Wbar = xr(0);
  if (!(m.Wbar > 0.0)) return std::nullopt;
  // theta + omega t = omega tbar + c' / t
  const Eigen::VectorXd xt2 = lsq(Ar, bt2);
  const Eigen::VectorXd xt = lsq(At, bt);
  m.slope = xt(1) / tmax;
  double ph = std::fmod(xt2(0), 2.0 * kPi);
  if (ph < 0.0) ph += 2.0 * kPi;
  m.etabar = ph / omega;
  double rr = 0.0, rt = 0.0, drift = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = p.time[i];
    rr = std::max(rr, std::abs(p.r[i] - xr(0) - xr(1) * tmax / t) / m.Wbar);
    rt = std::max(rt, std::abs(bt2(i) - xt2(0) - xt2(1) * tmax / t));
    drift = std::max(drift, std::abs(p.r[i] / m.Wbar - 1.0) * t);
  }
  m.residual = std::max(rr, rt);
  m.drift = drift;
  return m;
}

void check_times(std::span<const double> t, std::size_t min_samples) {
  if (t.size() < min_samples)
    fail(ErrorKind::Precondition, "late window has " + std::to_string(t.size()) +
                                      " samples; need at least " + std::to_string(min_samples));
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0)) fail(ErrorKind::Domain, "sample times must be positive");
    if (i > 0 && !(t[i] > t[i - 1])) fail(ErrorKind::Domain, "sample times must increase");
  }
}

struct TrackSet {
  std::vector<double> time;
  // psi-like values per real track: cos then sin per pair
  std::vector<std::vector<double>> v, dv;
  std::vector<std::array<int, 3>> keys;
  std::vector<double> omega;
};

WaveProfile fit_profile(const TrackSet& ts, const TorusGeometry& g, TimeVariable tv,
                        const ExtractOptions& opt) {
  const std::size_t nm = ts.v.size();
  std::vector<std::optional<ProfileMode>> slots(nm);
  std::vector<double> rmax(nm, 0.0);
  parallel_for(nm, [&](std::size_t j) {
    const auto p = polar_track(ts.keys[j], ts.time, ts.v[j], ts.dv[j], ts.omega[j]);
    rmax[j] = *std::max_element(p.r.begin(), p.r.end());
    if (rmax[j] > 0.0) slots[j] = fit_polar(p, ts.omega[j]);
  });
  const double top = nm ? *std::max_element(rmax.begin(), rmax.end()) : 0.0;
  WaveProfile prof;
  prof.geometry = g;
  prof.time_variable = tv;
  for (std::size_t j = 0; j < nm; ++j) {
    // amplitudes at roundoff level of the largest mode carry no phase
    if (!slots[j] || rmax[j] <= 1e-13 * top) continue;
    const auto& m = *slots[j];
    if (m.residual > opt.residual_threshold) {
      std::ostringstream os;
      os << "window too early: mode " << fmt_k(m.k) << " fit residual " << m.residual
         << " exceeds " << opt.residual_threshold << " on [" << ts.time.front() << ", "
         << ts.time.back() << "]";
      fail(ErrorKind::Inconclusive, os.str());
    }
    prof.max_residual = std::max(prof.max_residual, m.residual);
    prof.modes.push_back(m);
  }
  return prof;
}

// Hankel asymptotic sum S(x) = sum_m i^m a_m(nu) / x^m and dS/dx.
std::pair<cd, cd> hankel_sum(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  cd S = 1.0, dS = 0.0, im = 1.0;
  double a = 1.0, prev = std::numeric_limits<double>::infinity();
  for (int m = 1; m < 200; ++m) {
    a *= (mu - (2.0 * m - 1.0) * (2.0 * m - 1.0)) / (8.0 * m * x);
    im *= cd(0.0, 1.0);
    const double mag = std::abs(a);
    if (mag == 0.0 || mag >= prev) break;
    S += im * a;
    dS += -static_cast<double>(m) / x * im * a;
    prev = mag;
    if (mag < 1e-18 * std::abs(S)) break;
  }
  return {S, dS};
}

// psi and psi' of the real mode with profile (Wbar, tbar) and frequency omega.
std::pair<double, double> profile_mode(double Wbar, double tbar, double omega, double nu, double eta,
                                       bool corrections) {
  const double ph = omega * (eta - tbar);
  if (!corrections) return {Wbar * std::cos(ph), -omega * Wbar * std::sin(ph)};
  const auto [S, dS] = hankel_sum(nu, omega * eta);
  const cd e = std::polar(1.0, ph);
  const cd v = e * S;
  const cd dv = e * (cd(0.0, omega) * S + omega * dS);
  return {Wbar * v.real(), Wbar * dv.real()};
}

// log-derivatives of the background at eta
struct BgLocal {
  BackgroundState st;
  double H = 0.0, dH = 0.0, deps = 0.0;
  EosDerivatives d;
};

BgLocal local(const BackgroundTrajectory& traj, double eta) {
  BgLocal b;
  b.st = traj.at(eta);
  const auto r = traj.raw(eta);
  b.H = r.h / eta;
  b.dH = (r.dh - r.h) / (eta * eta);
  b.deps = b.st.eps * r.dlneps / eta;
  b.d = eos_derivatives(traj.eos(), b.st.eps);
  if (!(b.d.fp > 0.0)) fail(ErrorKind::Domain, "tau dynamics need f' > 0 along the trajectory");
  return b;
}

double tau_at(const BackgroundTrajectory& traj, double eta) {
  const auto s = traj.at(eta);
  if (!s.tau) fail(ErrorKind::Precondition, "trajectory has no tau; call tau_time first");
  return *s.tau;
}

double l2(const std::vector<double>& re, const std::vector<double>& im) {
  double s = 0.0;
  for (std::size_t i = 0; i < re.size(); ++i) s += re[i] * re[i] + im[i] * im[i];
  return std::sqrt(s);
}

}  // namespace

PsiState psi_transform(const PerturbationState& state, double w) {
  check_zero_mean(state.phi, "phi");
  check_zero_mean(state.dphi, "dphi");
  if (!(state.eta > 0.0)) fail(ErrorKind::Domain, "psi transform needs eta > 0");
  const double al = nu_index(w) + 0.5, p = std::pow(state.eta, al);
  PsiState out{state.eta, state.phi, state.dphi};
  for (std::size_t i = 0; i < state.phi.size(); ++i) {
    out.psi.re()[i] = p * state.phi.re()[i];
    out.psi.im()[i] = p * state.phi.im()[i];
    out.dpsi.re()[i] = p * (state.dphi.re()[i] + al * state.phi.re()[i] / state.eta);
    out.dpsi.im()[i] = p * (state.dphi.im()[i] + al * state.phi.im()[i] / state.eta);
  }
  return out;
}

PerturbationState psi_inverse(const PsiState& state, double w) {
  check_zero_mean(state.psi, "psi");
  check_zero_mean(state.dpsi, "dpsi");
  if (!(state.eta > 0.0)) fail(ErrorKind::Domain, "psi transform needs eta > 0");
  const double al = nu_index(w) + 0.5, p = std::pow(state.eta, -al);
  PerturbationState out{state.eta, state.psi, state.dpsi};
  for (std::size_t i = 0; i < state.psi.size(); ++i) {
    out.phi.re()[i] = p * state.psi.re()[i];
    out.phi.im()[i] = p * state.psi.im()[i];
    out.dphi.re()[i] = p * (state.dpsi.re()[i] - al * state.psi.re()[i] / state.eta);
    out.dphi.im()[i] = p * (state.dpsi.im()[i] - al * state.psi.im()[i] / state.eta);
  }
  return out;
}

PolarPoint mode_polar(double psi, double dpsi, double k_abs, double w) {
  if (w == 0.0) fail(ErrorKind::Unsupported, "polar mode form needs w > 0 (dust has no wave speed)");
  if (!(w > 0.0)) fail(ErrorKind::Domain, "w must be positive");
  if (!(k_abs > 0.0)) fail(ErrorKind::Domain, "polar mode form needs k != 0");
  const double y = dpsi / (std::sqrt(w) * k_abs);
  return {std::hypot(psi, y), std::atan2(y, psi)};
}

ModePolarTrack polar_track(std::array<int, 3> k, std::span<const double> time,
                           std::span<const double> psi, std::span<const double> dpsi,
                           double omega) {
  if (!(omega > 0.0)) fail(ErrorKind::Domain, "polar track needs omega > 0");
  const std::size_t n = time.size();
  if (psi.size() != n || dpsi.size() != n) fail(ErrorKind::Domain, "track length mismatch");
  ModePolarTrack p;
  p.k = k;
  p.time.assign(time.begin(), time.end());
  p.r.resize(n);
  p.theta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && (time[i] - time[i - 1]) * omega > 0.5 * kPi * (1.0 + 1e-12))
      fail(ErrorKind::Precondition, "sampling step exceeds pi / (2 omega) for mode " + fmt_k(k) +
                                        "; phase unwrapping would be ambiguous");
    const double y = dpsi[i] / omega;
    p.r[i] = std::hypot(psi[i], y);
    double th = std::atan2(y, psi[i]);
    if (i > 0) th += 2.0 * kPi * std::round((p.theta[i - 1] - th) / (2.0 * kPi));
    p.theta[i] = th;
  }
  return p;
}

HomogeneousFit fit_homogeneous(std::span<const double> eta, std::span<const double> mean, double w) {
  const std::size_t n = eta.size();
  if (n != mean.size()) fail(ErrorKind::Domain, "mean track length mismatch");
  if (n < 2) fail(ErrorKind::Precondition, "homogeneous fit needs at least two samples");
  const double nu = nu_index(w);
  HomogeneousFit r;
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  double top = 0.0, avg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(eta[i] > 0.0)) fail(ErrorKind::Domain, "homogeneous fit needs eta > 0");
    A(i, 0) = 1.0;
    A(i, 1) = std::pow(eta[i], -2.0 * nu);
    b(i) = mean[i];
    top = std::max(top, std::abs(A(i, 1)));
    avg += mean[i] / n;
  }
  bool degenerate = !(top > 1e-280);
  if (!degenerate) {
    Eigen::MatrixXd As = A;
    for (int c = 0; c < 2; ++c) As.col(c) /= As.col(c).norm();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(As);
    r.condition = svd.singularValues()(0) / svd.singularValues()(1);
    degenerate = !(r.condition <= 1e12);
  }
  if (degenerate) {
    r.degenerate = true;
    r.A = avg;
    r.B = 0.0;
    r.warnings.push_back("degenerate homogeneous fit: eta^{-2 nu} is negligible on the window; B set to 0");
    return r;
  }
  const Eigen::VectorXd x = lsq(A, b);
  r.A = x(0);
  r.B = x(1);
  return r;
}

const char* to_string(TimeVariable t) { return t == TimeVariable::Eta ? "eta" : "tau"; }

const ProfileMode* WaveProfile::find(std::array<int, 3> k) const {
  for (const auto& m : modes)
    if (m.k == k) return &m;
  return nullptr;
}

std::vector<double> late_window(double eta_max, double omega_max, std::size_t n) {
  if (!(eta_max > 0.0)) fail(ErrorKind::Domain, "eta_max must be positive");
  const double lo = 0.1 * eta_max, span = eta_max - lo;
  if (omega_max > 0.0) {
    const auto need = static_cast<std::size_t>(std::ceil(span * omega_max / (0.45 * kPi))) + 1;
    n = std::max(n, need);
  }
  n = std::max<std::size_t>(n, 2);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = lo + span * static_cast<double>(i) / (n - 1);
  t.back() = eta_max;
  return t;
}

WaveProfile extract_wave_profile(const ModeTracks& tracks, double w, const ExtractOptions& opt) {
  if (w == 0.0) fail(ErrorKind::Unsupported, "wave profile extraction needs w > 0");
  if (!(w > 0.0 && w <= 1.0)) fail(ErrorKind::Domain, "w must lie in (0, 1]");
  check_times(tracks.eta, opt.min_samples);
  const auto& g = tracks.geometry;
  const double al = nu_index(w) + 0.5, sw = std::sqrt(w);
  const auto sp = split_tracks(tracks);

  TrackSet ts;
  ts.time = tracks.eta;
  for (std::size_t p = 0; p < sp.index.size(); ++p) {
    const double om = sw * std::sqrt(g.k2(sp.index[p]));
    for (const auto* rt : {&sp.cos_part[p], &sp.sin_part[p]}) {
      std::vector<double> v(ts.time.size()), dv(ts.time.size());
      for (std::size_t t = 0; t < ts.time.size(); ++t) {
        const double e = ts.time[t], q = std::pow(e, al);
        v[t] = q * rt->v[t];
        dv[t] = q * (rt->dv[t] + al * rt->v[t] / e);
      }
      ts.v.push_back(std::move(v));
      ts.dv.push_back(std::move(dv));
      ts.keys.push_back(rt->key);
      ts.omega.push_back(om);
    }
  }
  WaveProfile prof = fit_profile(ts, g, TimeVariable::Eta, opt);
  if (sp.mean_slot) {
    std::vector<double> mean(ts.time.size());
    for (std::size_t t = 0; t < mean.size(); ++t) mean[t] = tracks.phi[*sp.mean_slot][t].real();
    auto h = fit_homogeneous(ts.time, mean, w);
    prof.A = h.A;
    prof.B = h.B;
    for (auto& s : h.warnings) prof.warnings.push_back(std::move(s));
  }
  return prof;
}

PerturbationState asymptotic_state(const WaveProfile& profile, double w, double eta,
                                   bool corrections) {
  if (profile.time_variable != TimeVariable::Eta)
    fail(ErrorKind::Precondition, "asymptotic state needs an eta-time profile");
  if (!(w > 0.0)) fail(ErrorKind::Unsupported, "asymptotic state needs w > 0");
  if (!(eta > 0.0)) fail(ErrorKind::Domain, "eta must be positive");
  const auto& g = profile.geometry;
  g.validate();
  const double nu = nu_index(w), al = nu + 0.5, sw = std::sqrt(w);
  const double q = std::pow(eta, -al);
  PerturbationState s{eta, SpectralField(g), SpectralField(g)};
  const double hom = std::pow(eta, -2.0 * nu);
  s.phi.set_mode(g.center(), profile.A + profile.B * hom);
  s.dphi.set_mode(g.center(), -2.0 * nu * profile.B * hom / eta);
  const int h = g.half();
  for (const auto& m : profile.modes) {
    for (int c : m.k)
      if (std::abs(c) > h) fail(ErrorKind::Domain, "profile mode " + fmt_k(m.k) + " outside the grid");
    const std::size_t i = g.index(m.k[0], m.k[1], m.k[2]);
    if (i == g.center()) fail(ErrorKind::Domain, "profile cannot contain k = 0");
    const bool cos_part = i > g.center();
    const std::size_t u = cos_part ? i : g.mirror(i);
    const double om = sw * std::sqrt(g.k2(u));
    const auto [v, dv] = profile_mode(m.Wbar, m.etabar, om, nu, eta, corrections);
    const double ph = q * v, dph = q * (dv - al * v / eta);
    // Phi_k = (c - i s) / 2
    const cd add = cos_part ? cd(0.5 * ph, 0.0) : cd(0.0, -0.5 * ph);
    const cd dadd = cos_part ? cd(0.5 * dph, 0.0) : cd(0.0, -0.5 * dph);
    s.phi.set_mode(u, s.phi.at(u) + add);
    s.dphi.set_mode(u, s.dphi.at(u) + dadd);
  }
  return s;
}

PerturbationState reconstruct_from_wave_profile(const WaveProfile& profile, double w,
                                                double eta_far, double eta_target,
                                                const ReconstructLateOptions& opt) {
  if (!(eta_far > eta_target && eta_target > 0.0))
    fail(ErrorKind::Domain, "need eta_far > eta_target > 0");
  const auto seed = asymptotic_state(profile, w, eta_far, opt.seed_corrections);
  return evolve(seed, WaveModel::linear(w), eta_target, EvolveOptions{opt.tol});
}

double zero_mean_amplitude(const PerturbationState& state, double w) {
  if (!(w > 0.0)) fail(ErrorKind::Unsupported, "amplitude norm needs w > 0");
  const auto& g = state.phi.geometry();
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i == g.center()) continue;
    const double k2 = w * g.k2(i);
    s += std::norm(state.phi.at(i)) + std::norm(state.dphi.at(i)) / k2;
  }
  return std::sqrt(s);
}

namespace {

// Cumulative ln Omega on the trajectory knots. The interpolant is smooth
// between knots, so a fixed Gauss rule per interval is exact to roundoff.
class OmegaTable {
 public:
  explicit OmegaTable(const BackgroundTrajectory& traj) : traj_(traj) {
    if (classify_regime(traj.eos()).regime == Regime::Overdamped)
      fail(ErrorKind::Unsupported, "Omega is not used in the overdamped regime; use the frozen profile");
    const auto& sm = traj.samples();
    us_.resize(sm.size());
    cum_.assign(sm.size(), 0.0);
    for (std::size_t j = 0; j < sm.size(); ++j) us_[j] = std::log(sm[j].eta);
    for (std::size_t j = 1; j < sm.size(); ++j) cum_[j] = cum_[j - 1] + piece(us_[j - 1], us_[j]);
    offset_ = raw(std::log(traj.eta0()));
  }

  double operator()(double eta) const { return raw(std::log(eta)) - offset_; }

 private:
  double piece(double a, double b) const {
    auto f = [&](double u) {
      const double e = std::exp(u);
      return tau_coefficients(traj_.eos(), traj_.at(e).eps).Z * traj_.raw(e).dlna;
    };
    return -1.5 * boost::math::quadrature::gauss<double, 10>::integrate(f, a, b);
  }

  double raw(double u) const {
    if (u < us_.front() || u > us_.back())
      fail(ErrorKind::Interpolation, "eta outside the trajectory for Omega");
    auto it = std::upper_bound(us_.begin(), us_.end(), u);
    const std::size_t j = it == us_.begin() ? 0 : static_cast<std::size_t>(it - us_.begin()) - 1;
    return u == us_[j] ? cum_[j] : cum_[j] + piece(us_[j], u);
  }

  const BackgroundTrajectory& traj_;
  std::vector<double> us_, cum_;
  double offset_ = 0.0;
};

}  // namespace

double log_omega(const BackgroundTrajectory& traj, double eta) { return OmegaTable(traj)(eta); }

std::vector<OmegaSample> omega_damping(const BackgroundTrajectory& traj) {
  const BackgroundTrajectory tt = traj.has_tau() ? traj : tau_time(traj);
  const OmegaTable lo(tt);
  const auto& samples = tt.samples();
  std::vector<OmegaSample> out(samples.size());
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const auto& s = samples[j];
    const auto d = eos_derivatives(tt.eos(), s.eps);
    auto& o = out[j];
    o.eta = s.eta;
    o.tau = s.tau.value_or(0.0);
    o.a = s.a;
    o.Htilde = s.H / std::sqrt(d.fp);
    o.Z = tau_coefficients(tt.eos(), s.eps).Z;
    o.Omega = std::exp(lo(s.eta));
  }
  return out;
}

TauDynamics tau_dynamics(const BackgroundTrajectory& traj, double eta) {
  const auto b = local(traj, eta);
  const auto& d = b.d;
  const double eps = b.st.eps;
  TauDynamics t;
  const auto tc = tau_coefficients(traj.eos(), eps);
  t.Y = tc.Y;
  t.Z = tc.Z;
  t.Htilde = b.H / std::sqrt(d.fp);
  t.Htilde_tau = b.dH / d.fp - 0.5 * b.H * d.fpp * b.deps / (d.fp * d.fp);
  const double eps_tau = -3.0 * t.Htilde * (eps + d.f);
  const double dZ = d.fpp - 0.5 * ((1.0 + d.fp) * d.fpp / d.fp +
                                   (eps + d.f) * (d.fppp * d.fp - d.fpp * d.fpp) / (d.fp * d.fp));
  t.Z_tau = dZ * eps_tau;
  t.A = 1.5 * (t.Z_tau * t.Htilde + t.Z * t.Htilde_tau) / (t.Htilde * t.Htilde) +
        2.25 * t.Z * t.Z - 3.0 * t.Y;
  return t;
}

namespace {

WaveProfile underdamped(const ModeTracks& tracks, const BackgroundTrajectory& tt,
                        const ExtractOptions& opt) {
  check_times(tracks.eta, opt.min_samples);
  const auto& g = tracks.geometry;
  const std::size_t nt = tracks.eta.size();
  std::vector<double> tau(nt), om_inv(nt), fp_sqrt(nt), damp(nt);
  const OmegaTable log_om(tt);
  for (std::size_t t = 0; t < nt; ++t) {
    const double e = tracks.eta[t];
    tau[t] = tau_at(tt, e);
    om_inv[t] = std::exp(-log_om(e));
    const auto b = local(tt, e);
    fp_sqrt[t] = std::sqrt(b.d.fp);
    damp[t] = 1.5 * tau_coefficients(tt.eos(), b.st.eps).Z * b.H / fp_sqrt[t];
  }
  const auto sp = split_tracks(tracks);
  TrackSet ts;
  ts.time = tau;
  for (std::size_t p = 0; p < sp.index.size(); ++p) {
    const double om = std::sqrt(g.k2(sp.index[p]));
    for (const auto* rt : {&sp.cos_part[p], &sp.sin_part[p]}) {
      std::vector<double> v(nt), dv(nt);
      for (std::size_t t = 0; t < nt; ++t) {
        v[t] = om_inv[t] * rt->v[t];
        dv[t] = om_inv[t] * (rt->dv[t] / fp_sqrt[t] + damp[t] * rt->v[t]);
      }
      ts.v.push_back(std::move(v));
      ts.dv.push_back(std::move(dv));
      ts.keys.push_back(rt->key);
      ts.omega.push_back(om);
    }
  }
  check_times(ts.time, opt.min_samples);
  WaveProfile prof = fit_profile(ts, g, TimeVariable::Tau, opt);
  if (sp.mean_slot) {
    std::vector<double> mean(nt);
    for (std::size_t t = 0; t < nt; ++t) mean[t] = tracks.phi[*sp.mean_slot][t].real();
    auto h = fit_homogeneous(tracks.eta, mean, tt.eos().limiting_w());
    prof.A = h.A;
    prof.B = h.B;
    for (auto& s : h.warnings) prof.warnings.push_back(std::move(s));
  }
  return prof;
}

SpectralField field_at(const ModeTracks& tr, std::size_t t) {
  SpectralField f(tr.geometry);
  for (std::size_t m = 0; m < tr.modes.size(); ++m) f.set_mode(tr.modes[m], tr.phi[m][t]);
  return f;
}

FrozenProfile overdamped(const ModeTracks& tracks, const BackgroundTrajectory& tt, double sigma,
                         double limit_tol) {
  if (!tt.tau_limit()) fail(ErrorKind::Inconclusive, "no tau_inf extrapolation on the trajectory");
  const auto& lim = *tt.tau_limit();
  const std::size_t nt = tracks.eta.size();
  if (nt < 4) fail(ErrorKind::Inconclusive, "frozen profile needs at least 4 snapshots");
  std::vector<double> s(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    s[t] = lim.tau_inf - tau_at(tt, tracks.eta[t]);
    if (!(s[t] > 0.0))
      fail(ErrorKind::Inconclusive, "snapshot at eta = " + std::to_string(tracks.eta[t]) +
                                        " is not before tau_inf (s = " + std::to_string(s[t]) + ")");
  }
  std::vector<std::size_t> ord(nt);
  for (std::size_t t = 0; t < nt; ++t) ord[t] = t;
  std::sort(ord.begin(), ord.end(), [&](auto a, auto b) { return s[a] > s[b]; });

  std::vector<SpectralField> snaps;
  for (std::size_t t : ord) snaps.push_back(field_at(tracks, t));
  const auto& g = tracks.geometry;
  const std::size_t n = g.size();

  // Lagrange extrapolation to s^2 = 0 through three snapshots
  auto richardson = [&](std::size_t last) {
    const std::size_t j[3] = {last - 2, last - 1, last};
    double x[3], c[3];
    for (int a = 0; a < 3; ++a) x[a] = s[ord[j[a]]] * s[ord[j[a]]];
    for (int a = 0; a < 3; ++a) {
      c[a] = 1.0;
      for (int b = 0; b < 3; ++b)
        if (b != a) c[a] *= x[b] / (x[b] - x[a]);
    }
    SpectralField f(g);
    for (std::size_t i = 0; i < n; ++i)
      for (int a = 0; a < 3; ++a) {
        f.re()[i] += c[a] * snaps[j[a]].re()[i];
        f.im()[i] += c[a] * snaps[j[a]].im()[i];
      }
    return f;
  };
  FrozenProfile fp;
  fp.phi0 = richardson(nt - 1);
  const SpectralField prev = richardson(nt - 2);
  {
    std::vector<double> dr(n), di(n);
    for (std::size_t i = 0; i < n; ++i) {
      dr[i] = fp.phi0.re()[i] - prev.re()[i];
      di[i] = fp.phi0.im()[i] - prev.im()[i];
    }
    const double base = l2(fp.phi0.re(), fp.phi0.im());
    fp.limit_change = base > 0.0 ? l2(dr, di) / base : l2(dr, di);
  }
  if (fp.limit_change > limit_tol) {
    std::ostringstream os;
    os << "window insufficient for the frozen limit: Richardson limit moves by " << fp.limit_change
       << " (tolerance " << limit_tol << ") with s in [" << s[ord.back()] << ", " << s[ord.front()]
       << "]; extend the snapshots to smaller s";
    fail(ErrorKind::Inconclusive, os.str());
  }

  // q from Phi - Phi0 = q s^2 + r s^4 + p s^6
  const int nb = std::min<int>(3, static_cast<int>(nt) - 1);
  Eigen::MatrixXd A(nt, nb);
  const double smax = s[ord.front()];
  for (std::size_t t = 0; t < nt; ++t)
    for (int c = 0; c < nb; ++c) A(t, c) = std::pow(s[ord[t]] / smax, 2.0 * (c + 1));
  Eigen::MatrixXd B(nt, 2 * n);
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t i = 0; i < n; ++i) {
      B(t, i) = snaps[t].re()[i] - fp.phi0.re()[i];
      B(t, n + i) = snaps[t].im()[i] - fp.phi0.im()[i];
    }
  const Eigen::MatrixXd X = A.colPivHouseholderQr().solve(B);
  fp.quad_coeff = SpectralField(g);
  for (std::size_t i = 0; i < n; ++i) {
    fp.quad_coeff.re()[i] = X(0, i) / (smax * smax);
    fp.quad_coeff.im()[i] = X(0, n + i) / (smax * smax);
  }

  fp.sigma = sigma;
  fp.tau_inf = lim.tau_inf;
  fp.tau_inf_rel_change = lim.relative_change();
  fp.s_min = s[ord.back()];
  fp.s_max = smax;
  fp.derived_ratio = (3.0 * sigma - 1.0) / (12.0 * sigma - 14.0);
  const double stated = (sigma - 1.0 / 3.0) / (4.0 - 2.0 * sigma);
  std::vector<double> lr(n), li(n);
  double dot = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double k2 = g.k2(i);
    lr[i] = -k2 * fp.phi0.re()[i];
    li[i] = -k2 * fp.phi0.im()[i];
    dot += fp.quad_coeff.re()[i] * lr[i] + fp.quad_coeff.im()[i] * li[i];
    nn += lr[i] * lr[i] + li[i] * li[i];
  }
  fp.measured_ratio = nn > 0.0 ? dot / nn : 0.0;
  auto rel_err = [&](double c) {
    std::vector<double> er(n), ei(n);
    for (std::size_t i = 0; i < n; ++i) {
      er[i] = fp.quad_coeff.re()[i] - c * lr[i];
      ei[i] = fp.quad_coeff.im()[i] - c * li[i];
    }
    const double ref = std::abs(c) * std::sqrt(nn);
    return ref > 0.0 ? l2(er, ei) / ref : l2(er, ei);
  };
  fp.quad_rel_err = rel_err(stated);
  fp.derived_rel_err = rel_err(fp.derived_ratio);
  return fp;
}

CriticalReport critical(const BackgroundTrajectory& tt) {
  const auto& sm = tt.samples();
  if (sm.size() < 4) fail(ErrorKind::Inconclusive, "trajectory too short for the critical report");
  CriticalReport r;
  const double emax = sm.back().eta;
  // d tau / d ln eta over the last decade of eta
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& s : sm) {
    if (s.eta < 0.1 * emax) continue;
    const double x = std::log(s.eta), y = *s.tau;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 3) fail(ErrorKind::Inconclusive, "too few samples in the last decade of eta");
  r.tau_log_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  r.tau_end = *sm.back().tau;
  r.tau_start = 0.1 * r.tau_end;
  if (!(r.tau_end > 0.0)) fail(ErrorKind::Inconclusive, "tau did not grow along the trajectory");
  r.htilde_min = std::numeric_limits<double>::infinity();
  r.htilde_max = 0.0;
  for (const auto& s : sm) {
    if (*s.tau < r.tau_start) continue;
    const double ht = s.H / std::sqrt(eos_derivatives(tt.eos(), s.eps).fp);
    r.htilde_min = std::min(r.htilde_min, ht);
    r.htilde_max = std::max(r.htilde_max, ht);
  }
  r.htilde_variation = (r.htilde_max - r.htilde_min) / r.htilde_max;
  return r;
}

}  // namespace

LateTimeResult general_latetime_extract(const ModeTracks& tracks, const BackgroundTrajectory& traj,
                                        const GeneralExtractOptions& opt) {
  const auto rc = classify_regime(traj.eos());
  const BackgroundTrajectory tt = traj.has_tau() ? traj : tau_time(traj);
  switch (rc.regime) {
    case Regime::Underdamped:
      return underdamped(tracks, tt, opt.extract);
    case Regime::Overdamped:
      return overdamped(tracks, tt, rc.sigma.value_or(0.0), opt.limit_tol);
    case Regime::Critical:
      return critical(tt);
  }
  fail(ErrorKind::Unsupported, "unknown regime");
}

void write_wave_profile_csv(const WaveProfile& profile, const std::string& path) {
  CsvWriter w(path, "kx,ky,kz,Wbar,etabar,residual");
  for (const auto& m : profile.modes) {
    w << m.k[0] << m.k[1] << m.k[2] << m.Wbar << m.etabar << m.residual;
    w.end_row();
  }
  w.close();
}

WaveProfile read_wave_profile_csv(const std::string& path, const TorusGeometry& g) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::Io, "cannot open wave profile " + path);
  std::string line;
  if (!std::getline(is, line) || line != "kx,ky,kz,Wbar,etabar,residual")
    fail(ErrorKind::Io, path + ": expected header kx,ky,kz,Wbar,etabar,residual");
  WaveProfile p;
  p.geometry = g;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    ProfileMode m;
    if (!(ls >> m.k[0] >> m.k[1] >> m.k[2] >> m.Wbar >> m.etabar >> m.residual))
      fail(ErrorKind::Io, path + ": malformed row " + std::to_string(row));
    p.modes.push_back(m);
  }
  return p;
}

void write_frozen_profile(const FrozenProfile& fp, const std::string& dir) {
  ensure_directory(dir);
  write_field(fp.phi0, dir + "/phi0.json");
  write_field(fp.quad_coeff, dir + "/quad_coeff.json");
  nlohmann::ordered_json j;
  j["sigma"] = fp.sigma;
  j["tau_inf"] = fp.tau_inf;
  j["quad_rel_err"] = fp.quad_rel_err;
  j["tau_inf_rel_change"] = fp.tau_inf_rel_change;
  j["measured_ratio"] = fp.measured_ratio;
  j["derived_ratio"] = fp.derived_ratio;
  j["derived_rel_err"] = fp.derived_rel_err;
  j["limit_change"] = fp.limit_change;
  j["s_min"] = fp.s_min;
  j["s_max"] = fp.s_max;
  write_text(dir + "/frozen.json", j.dump(2) + "\n");
}

}  // namespace pertasym
