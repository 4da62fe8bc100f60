#include "pertasym/singularity.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <complex>
#include <json.hpp>
#include <map>
#include <sstream>

#include "pertasym/error.hpp"
#include "pertasym/io.hpp"
#include "pertasym/ode.hpp"
#include "pertasym/parallel.hpp"

namespace pertasym {

using nlohmann::json;

bool nu_is_integer(double nu) { return std::abs(nu - std::round(nu)) < 1e-9; }

bool nu_near_resonant(double nu) {
  const double d = std::abs(nu - std::round(nu));
  return d >= 1e-9 && d < 1e-3;
}

namespace {

// Coefficient of one term for the two unit data (psi1 = 1) and (psi2 = 1) on
// a shell with Laplacian eigenvalue -lam.
struct ScalarTerm {
  double k;
  int l;
  double c1 = 0.0, c2 = 0.0;
};

struct Lattice {
  std::vector<std::pair<double, int>> keys;  // (k, l) in storage order
  std::vector<std::size_t> top;              // last term of every chain
};

// Exponent lattice for index nu up to K_max. Chains follow the k -> k+2
// recursion.
Lattice make_lattice(double w, double nu, bool resonant, double K_max) {
  Lattice L;
  if (w == 0.0) {
    L.keys = {{-2.0 * nu, 0}, {0.0, 0}};
    return L;
  }
  if (resonant) {
    const int n = static_cast<int>(std::lround(nu));
    for (int k = -2 * n; k <= K_max; k += 2) {
      L.keys.push_back({static_cast<double>(k), 0});
      if (k >= 0) L.keys.push_back({static_cast<double>(k), 1});
    }
    L.top.push_back(L.keys.size() - 1);
    if (L.keys.size() >= 2 && L.keys[L.keys.size() - 1].second == 1)
      L.top.push_back(L.keys.size() - 2);
  } else {
    std::size_t start = 0;
    for (int i = 0; -2.0 * nu + 2.0 * i <= K_max; ++i) L.keys.push_back({-2.0 * nu + 2.0 * i, 0});
    L.top.push_back(L.keys.size() - 1);
    start = L.keys.size();
    for (int i = 0; 2.0 * i <= K_max; ++i) L.keys.push_back({2.0 * i, 0});
    if (L.keys.size() > start) L.top.push_back(L.keys.size() - 1);
  }
  return L;
}

std::vector<ScalarTerm> scalar_series(double w, double nu, const Lattice& L, double lam) {
  std::vector<ScalarTerm> t;
  t.reserve(L.keys.size());
  for (auto [k, l] : L.keys) t.push_back({k, l});
  const double two_nu = 2.0 * nu;
  auto find = [&](double k, int l) -> ScalarTerm* {
    for (auto& x : t)
      if (x.l == l && std::abs(x.k - k) < 1e-12) return &x;
    return nullptr;
  };
  // keys are generated in increasing k within each chain, so a forward pass
  // sees every source before it is used
  for (auto& x : t) {
    if (x.l == 1) continue;
    ScalarTerm* logt = find(x.k, 1);
    const ScalarTerm* prev = find(x.k - 2.0, 0);
    const ScalarTerm* prevlog = find(x.k - 2.0, 1);
    const double d = x.k * (x.k + two_nu);
    if (std::abs(x.k + two_nu) < 1e-12 && !prev) {
      x.c1 = 1.0;
      continue;
    }
    if (std::abs(x.k) < 1e-12) {
      x.c2 = 1.0;
      if (logt && prev) {
        logt->c1 = -w * lam * prev->c1 / two_nu;
        logt->c2 = -w * lam * prev->c2 / two_nu;
      }
      continue;
    }
    if (logt) {
      logt->c1 = prevlog ? -w * lam * prevlog->c1 / d : 0.0;
      logt->c2 = prevlog ? -w * lam * prevlog->c2 / d : 0.0;
    }
    const double b1 = logt ? logt->c1 : 0.0, b2 = logt ? logt->c2 : 0.0;
    const double a1 = prev ? prev->c1 : 0.0, a2 = prev ? prev->c2 : 0.0;
    x.c1 = (-w * lam * a1 - (2.0 * x.k + two_nu) * b1) / d;
    x.c2 = (-w * lam * a2 - (2.0 * x.k + two_nu) * b2) / d;
  }
  return t;
}

struct Params {
  double w, nu;
  bool resonant;
  std::vector<std::string> warnings;
};

Params series_params(double w) {
  Params p{w, nu_index(w), false, {}};
  p.resonant = nu_is_integer(p.nu);
  if (nu_near_resonant(p.nu)) {
    std::ostringstream os;
    os << "w = " << w << " is near-resonant (nu = " << p.nu
       << "); series coefficients are ill-conditioned";
    p.warnings.push_back(os.str());
  }
  return p;
}

// value and eta-derivative of sum (c) eta^k (log eta)^l for both unit data
struct Pair2 {
  double s1 = 0.0, d1 = 0.0, s2 = 0.0, d2 = 0.0;
};

Pair2 eval_scalar(const std::vector<ScalarTerm>& t, double eta) {
  const double lg = std::log(eta);
  Pair2 r;
  for (const auto& x : t) {
    const double p = std::pow(eta, x.k);
    double v = p, dv = x.k * p / eta;
    if (x.l == 1) {
      v = p * lg;
      dv = (x.k * lg + 1.0) * p / eta;
    }
    r.s1 += x.c1 * v;
    r.d1 += x.c1 * dv;
    r.s2 += x.c2 * v;
    r.d2 += x.c2 * dv;
  }
  return r;
}

}  // namespace

const SeriesTerm* SeriesExpansion::find(double k, int l) const {
  for (const auto& t : terms)
    if (t.l == l && std::abs(t.k - k) < 1e-9) return &t;
  return nullptr;
}

double SeriesExpansion::first_omitted() const {
  if (w == 0.0) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  for (double base : {-2.0 * nu, 0.0}) {
    double k = base;
    while (k <= K_max + 1e-12) k += 2.0;
    best = std::min(best, k);
  }
  return best;
}

SeriesExpansion build_series(double w, const SingularityData& data, double K_max) {
  if (!(K_max >= 0.0)) fail(ErrorKind::Domain, "K_max must be >= 0");
  if (!(data.psi1.geometry() == data.psi2.geometry()))
    fail(ErrorKind::Domain, "singularity data must share one geometry");
  auto p = series_params(w);
  SeriesExpansion s;
  s.w = w;
  s.nu = p.nu;
  s.K_max = K_max;
  s.resonant = p.resonant;
  s.warnings = std::move(p.warnings);
  const Lattice L = make_lattice(w, p.nu, p.resonant, K_max);
  const auto& g = data.psi1.geometry();
  const Shells shells = make_shells(g);
  const double ks2 = g.kscale() * g.kscale();
  std::vector<std::vector<ScalarTerm>> per_shell(shells.n2.size());
  for (std::size_t j = 0; j < shells.n2.size(); ++j)
    per_shell[j] = scalar_series(w, p.nu, L, ks2 * shells.n2[j]);

  for (std::size_t t = 0; t < L.keys.size(); ++t) {
    SeriesTerm term{L.keys[t].first, L.keys[t].second, SpectralField(g)};
    auto& re = term.coeff.re();
    auto& im = term.coeff.im();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& c = per_shell[shells.of[i]][t];
      re[i] = c.c1 * data.psi1.re()[i] + c.c2 * data.psi2.re()[i];
      im[i] = c.c1 * data.psi1.im()[i] + c.c2 * data.psi2.im()[i];
    }
    s.terms.push_back(std::move(term));
  }
  std::stable_sort(s.terms.begin(), s.terms.end(), [](const auto& a, const auto& b) {
    return a.k != b.k ? a.k < b.k : a.l < b.l;
  });
  return s;
}

SeriesValue evaluate_series(const SeriesExpansion& series, double eta) {
  if (!(eta > 0.0)) fail(ErrorKind::Domain, "series needs eta > 0");
  if (series.terms.empty()) fail(ErrorKind::Domain, "empty series");
  const auto& g = series.terms.front().coeff.geometry();
  SeriesValue v{SpectralField(g), SpectralField(g), series.warnings};
  if (eta >= 1.0) {
    std::ostringstream os;
    os << "series evaluated at eta = " << eta << " >= 1, outside its asymptotic regime";
    v.warnings.push_back(os.str());
  }
  const double lg = std::log(eta);
  for (const auto& t : series.terms) {
    const double p = std::pow(eta, t.k);
    double a = p, da = t.k * p / eta;
    if (t.l == 1) {
      a = p * lg;
      da = (t.k * lg + 1.0) * p / eta;
    }
    v.phi.axpy(a, t.coeff);
    v.dphi.axpy(da, t.coeff);
  }
  return v;
}

namespace {

// Per shell: the two unit-data solutions at every requested time.
struct ShellSolution {
  std::vector<Pair2> at;
};

ShellSolution solve_shell(double w, double nu, const Lattice& L, double lam,
                          std::span<const double> etas, const ReconstructOptions& opt) {
  const auto terms = scalar_series(w, nu, L, lam);
  ShellSolution out;
  out.at.resize(etas.size());
  const double eta_switch = std::max(opt.eta_start, 0.1);

  std::vector<std::size_t> early, late;
  for (std::size_t i = 0; i < etas.size(); ++i) (etas[i] <= eta_switch ? early : late).push_back(i);
  std::sort(early.begin(), early.end(), [&](auto a, auto b) { return etas[a] < etas[b]; });

  // top-order residual of the truncated series: L[S] = w lam (A + B log eta) eta^k
  std::vector<ScalarTerm> top;
  for (std::size_t j : L.top) top.push_back(terms[j]);
  const double wl = w * lam;
  auto forcing = [&](double eta) {
    std::array<double, 2> r{0.0, 0.0};
    if (wl == 0.0) return r;
    const double lg = std::log(eta);
    for (const auto& x : top) {
      const double p = std::pow(eta, x.k) * (x.l == 1 ? lg : 1.0);
      r[0] += wl * x.c1 * p;
      r[1] += wl * x.c2 * p;
    }
    return r;
  };

  // remainder v = Phi - S for each unit datum, from v = v' = 0 at eta_start
  std::vector<double> targets;
  for (std::size_t i : early) targets.push_back(std::log(etas[i]));
  const bool need_switch = !late.empty();
  if (need_switch) targets.push_back(std::log(eta_switch));
  Pair2 at_switch;
  if (!targets.empty()) {
    using Y = ode::State<4>;
    const double friction = 2.0 * nu + 1.0;
    auto rhs = [&](double s, const Y& y) -> Y {
      const double eta = std::exp(s);
      const auto f = forcing(eta);
      return {eta * y[1], eta * (-friction * y[1] / eta - wl * y[0] - f[0]), eta * y[3],
              eta * (-friction * y[3] / eta - wl * y[2] - f[1])};
    };
    auto scale = [&](double s, const Y& y, const Y& yn) -> Y {
      const double eta = std::exp(s);
      const double kap = std::sqrt(wl + 1.0 / (eta * eta));
      const Pair2 S = eval_scalar(terms, eta);
      const double m1 = std::hypot(S.s1, S.d1 / kap) + std::hypot(y[0], y[1] / kap) +
                        std::hypot(yn[0], yn[1] / kap);
      const double m2 = std::hypot(S.s2, S.d2 / kap) + std::hypot(y[2], y[3] / kap) +
                        std::hypot(yn[2], yn[3] / kap);
      const double v1 = opt.tol * m1 + 1e-300, v2 = opt.tol * m2 + 1e-300;
      return {v1, kap * v1, v2, kap * v2};
    };
    ode::Options o;
    o.rtol = opt.tol;
    o.atol = 0.0;
    ode::integrate<4>(rhs, std::log(opt.eta_start), Y{0.0, 0.0, 0.0, 0.0}, targets, o, scale,
                      [&](std::size_t j, double s, const Y& y) {
                        const Pair2 S = eval_scalar(terms, std::exp(s));
                        const Pair2 v{S.s1 + y[0], S.d1 + y[1], S.s2 + y[2], S.d2 + y[3]};
                        if (j < early.size())
                          out.at[early[j]] = v;
                        else
                          at_switch = v;
                      });
  }
  if (need_switch) {
    std::vector<double> lt;
    for (std::size_t i : late) lt.push_back(etas[i]);
    const auto T = mode_transfers(WaveModel::linear(w), lam, eta_switch, lt, {opt.tol});
    for (std::size_t j = 0; j < late.size(); ++j) {
      const auto& m = T[j];
      out.at[late[j]] = {m.m00 * at_switch.s1 + m.m01 * at_switch.d1,
                         m.m10 * at_switch.s1 + m.m11 * at_switch.d1,
                         m.m00 * at_switch.s2 + m.m01 * at_switch.d2,
                         m.m10 * at_switch.s2 + m.m11 * at_switch.d2};
    }
  }
  return out;
}

}  // namespace

std::vector<PerturbationState> reconstruct_samples(double w, const SingularityData& data,
                                                   std::span<const double> etas,
                                                   const ReconstructOptions& opt) {
  if (!(opt.eta_start > 0.0)) fail(ErrorKind::Domain, "eta_start must be > 0");
  if (!(data.psi1.geometry() == data.psi2.geometry()))
    fail(ErrorKind::Domain, "singularity data must share one geometry");
  for (double e : etas)
    if (!(e >= opt.eta_start)) fail(ErrorKind::Domain, "sample times must be >= eta_start");
  auto p = series_params(w);
  // neglected tail relative to the leading term
  {
    SeriesExpansion probe;
    probe.w = w;
    probe.nu = p.nu;
    probe.K_max = opt.K_max;
    const double tail = std::pow(opt.eta_start, probe.first_omitted() + 2.0 * p.nu);
    if (tail > opt.tol) {
      std::ostringstream os;
      os << "eta_start = " << opt.eta_start << " leaves a series tail of " << tail
         << " relative to the leading term; lower eta_start or raise K_max";
      fail(ErrorKind::Precondition, os.str());
    }
  }
  if (!(opt.K_max >= 0.0)) fail(ErrorKind::Domain, "K_max must be >= 0");
  const Lattice L = make_lattice(w, p.nu, p.resonant, opt.K_max);
  const auto& g = data.psi1.geometry();
  const Shells shells = make_shells(g);
  std::vector<bool> used(shells.n2.size(), false);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (data.psi1.re()[i] != 0.0 || data.psi1.im()[i] != 0.0 || data.psi2.re()[i] != 0.0 ||
        data.psi2.im()[i] != 0.0)
      used[shells.of[i]] = true;
  std::vector<std::size_t> active;
  for (std::size_t s = 0; s < used.size(); ++s)
    if (used[s]) active.push_back(s);
  const double ks2 = g.kscale() * g.kscale();
  std::vector<ShellSolution> sol(shells.n2.size());
  parallel_for(active.size(), [&](std::size_t j) {
    const std::size_t s = active[j];
    sol[s] = solve_shell(w, p.nu, L, ks2 * shells.n2[s], etas, opt);
  });

  std::vector<PerturbationState> out;
  out.reserve(etas.size());
  for (std::size_t t = 0; t < etas.size(); ++t) {
    PerturbationState st{etas[t], SpectralField(g), SpectralField(g)};
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!used[shells.of[i]]) continue;
      const Pair2& v = sol[shells.of[i]].at[t];
      const double r1 = data.psi1.re()[i], i1 = data.psi1.im()[i];
      const double r2 = data.psi2.re()[i], i2 = data.psi2.im()[i];
      st.phi.re()[i] = v.s1 * r1 + v.s2 * r2;
      st.phi.im()[i] = v.s1 * i1 + v.s2 * i2;
      st.dphi.re()[i] = v.d1 * r1 + v.d2 * r2;
      st.dphi.im()[i] = v.d1 * i1 + v.d2 * i2;
    }
    out.push_back(std::move(st));
  }
  return out;
}

PerturbationState reconstruct_from_singularity_data(double w, const SingularityData& data,
                                                    double eta_end,
                                                    const ReconstructOptions& opt) {
  const double t[] = {eta_end};
  return std::move(reconstruct_samples(w, data, t, opt).front());
}

const FitTerm* SingularityFit::find(double k, int l) const {
  for (const auto& t : terms)
    if (t.l == l && std::abs(t.k - k) < 1e-9) return &t;
  return nullptr;
}

std::vector<double> default_fit_window() {
  std::vector<double> e(40);
  const double lo = std::log(1e-3), hi = std::log(5e-2);
  for (int i = 0; i < 40; ++i) e[i] = std::exp(lo + (hi - lo) * i / 39.0);
  return e;
}

std::vector<std::pair<double, int>> fit_basis(double w, double K_fit) {
  const double nu = nu_index(w);
  std::vector<std::pair<double, int>> b;
  if (w == 0.0) return {{-2.0 * nu, 0}, {0.0, 0}, {0.0, 1}};
  const bool resonant = nu_is_integer(nu);
  if (resonant) {
    const int n = static_cast<int>(std::lround(nu));
    for (int k = -2 * n; k <= K_fit; k += 2) b.push_back({static_cast<double>(k), 0});
  } else {
    for (int i = 0; -2.0 * nu + 2.0 * i <= K_fit; ++i) b.push_back({-2.0 * nu + 2.0 * i, 0});
    for (int i = 0; 2.0 * i <= K_fit; ++i) b.push_back({2.0 * i, 0});
  }
  for (int i = 0; 2.0 * i <= K_fit; ++i) b.push_back({2.0 * i, 1});
  std::sort(b.begin(), b.end());
  return b;
}

namespace {

struct LsqResult {
  std::vector<FitTerm> terms;
  double condition = 0.0;
  std::vector<std::size_t> modes;
  std::vector<double> residual;
  double max_residual = 0.0;
};

// Weighted per-coefficient least squares of phi samples against
// eta^k (log eta)^l. Weights multiply each row.
LsqResult weighted_fit(std::span<const PerturbationState> samples,
                       const std::vector<std::pair<double, int>>& basis,
                       const std::vector<double>& weights, double max_condition) {
  // rows: phi at every sample, then eta phi' at every sample
  const std::size_t ns = samples.size(), m = 2 * ns, nb = basis.size();
  if (ns < nb) fail(ErrorKind::Precondition, "fewer samples than basis functions");
  const auto& g = samples.front().phi.geometry();
  Eigen::MatrixXd A(m, nb);
  for (std::size_t r = 0; r < ns; ++r) {
    const double eta = samples[r].eta, lg = std::log(eta);
    for (std::size_t c = 0; c < nb; ++c) {
      const double k = basis[c].first, p = std::pow(eta, k);
      const bool log_term = basis[c].second == 1;
      A(r, c) = weights[r] * p * (log_term ? lg : 1.0);
      A(ns + r, c) = weights[r] * p * (log_term ? k * lg + 1.0 : k);
    }
  }
  Eigen::VectorXd colscale(nb);
  for (std::size_t c = 0; c < nb; ++c) {
    colscale(c) = A.col(c).norm();
    if (colscale(c) == 0.0) fail(ErrorKind::IllConditioned, "fit basis column vanishes");
    A.col(c) /= colscale(c);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cond = sv(0) / sv(sv.size() - 1);
  if (!(cond <= max_condition)) {
    std::ostringstream os;
    os << "fit basis condition number " << cond << " exceeds " << max_condition
       << "; use a smaller window or lower K_fit";
    fail(ErrorKind::IllConditioned, os.str());
  }

  std::vector<std::size_t> modes;
  for (std::size_t i = g.center(); i < g.size(); ++i) modes.push_back(i);
  const std::size_t nm = modes.size();
  Eigen::MatrixXd B(m, 2 * nm);
  for (std::size_t r = 0; r < ns; ++r) {
    const auto& s = samples[r];
    if (!(s.phi.geometry() == g && s.dphi.geometry() == g))
      fail(ErrorKind::Domain, "samples differ in geometry");
    const double we = weights[r] * s.eta;
    for (std::size_t j = 0; j < nm; ++j) {
      B(r, 2 * j) = weights[r] * s.phi.re()[modes[j]];
      B(r, 2 * j + 1) = weights[r] * s.phi.im()[modes[j]];
      B(ns + r, 2 * j) = we * s.dphi.re()[modes[j]];
      B(ns + r, 2 * j + 1) = we * s.dphi.im()[modes[j]];
    }
  }
  const Eigen::MatrixXd X = svd.solve(B);
  const Eigen::MatrixXd R = A * X - B;

  LsqResult out;
  out.condition = cond;
  out.modes = modes;
  out.residual.resize(nm);
  for (std::size_t j = 0; j < nm; ++j) {
    const double num = R.col(2 * j).squaredNorm() + R.col(2 * j + 1).squaredNorm();
    const double den = B.col(2 * j).squaredNorm() + B.col(2 * j + 1).squaredNorm();
    out.residual[j] = den > 0.0 ? std::sqrt(num / den) : 0.0;
    out.max_residual = std::max(out.max_residual, out.residual[j]);
  }
  for (std::size_t c = 0; c < nb; ++c) {
    FitTerm t{basis[c].first, basis[c].second, SpectralField(g)};
    for (std::size_t j = 0; j < nm; ++j)
      t.coeff.set_mode(modes[j], {X(c, 2 * j) / colscale(c), X(c, 2 * j + 1) / colscale(c)});
    out.terms.push_back(std::move(t));
  }
  return out;
}

}  // namespace

SingularityFit fit_asymptotic_data(std::span<const PerturbationState> samples, double w,
                                   const FitOptions& opt) {
  if (samples.empty()) fail(ErrorKind::Precondition, "no samples to fit");
  for (const auto& s : samples)
    if (!(s.eta > 0.0 && s.eta <= 0.1))
      fail(ErrorKind::Precondition, "fit samples must lie in (0, 0.1]");
  const double nu = nu_index(w);
  const auto basis = fit_basis(w, opt.K_fit);
  std::vector<double> weights;
  for (const auto& s : samples) weights.push_back(std::pow(s.eta, 2.0 * nu));
  auto r = weighted_fit(samples, basis, weights, opt.max_condition);
  SingularityFit fit;
  fit.terms = std::move(r.terms);
  fit.condition = r.condition;
  fit.modes = std::move(r.modes);
  fit.residual = std::move(r.residual);
  fit.max_residual = r.max_residual;
  fit.data.psi1 = fit.find(-2.0 * nu, 0)->coeff;
  fit.data.psi2 = fit.find(0.0, 0)->coeff;
  return fit;
}

namespace {

double leading_slope(std::span<const PerturbationState> samples) {
  double emin = samples.front().eta;
  for (const auto& s : samples) emin = std::min(emin, s.eta);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& s : samples) {
    if (s.eta > 10.0 * emin * (1.0 + 1e-12)) continue;
    const double x = std::log(s.eta), y = 0.5 * std::log(s.phi.norm2());
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 3) fail(ErrorKind::Precondition, "need at least 3 samples in the smallest decade");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

GeneralSingularityFit fit_singularity_general(const EquationOfState& eos,
                                              std::span<const PerturbationState> samples,
                                              const FitOptions& opt) {
  if (samples.empty()) fail(ErrorKind::Precondition, "no samples to fit");
  GeneralSingularityFit r;
  r.w_limit = eos.limiting_w();
  const double nu = nu_index(r.w_limit);
  r.expected_exponent = -2.0 * nu;
  r.measured_exponent = leading_slope(samples);
  if (std::holds_alternative<LinearEos>(eos.variant())) {
    const auto f = fit_asymptotic_data(samples, r.w_limit, opt);
    r.data = f.data;
    r.max_residual = f.max_residual;
    return r;
  }
  // correction exponents depend on the equation of state; integer steps in
  // eta above the leading term absorb them to the order needed here
  const std::vector<std::pair<double, int>> basis{
      {-2.0 * nu, 0}, {-2.0 * nu + 1.0, 0}, {-2.0 * nu + 2.0, 0}, {0.0, 0}};
  std::vector<double> weights;
  for (const auto& s : samples) weights.push_back(std::pow(s.eta, 2.0 * nu));
  auto f = weighted_fit(samples, basis, weights, opt.max_condition);
  r.data.psi1 = f.terms[0].coeff;
  r.data.psi2 = f.terms[3].coeff;
  r.max_residual = f.max_residual;
  return r;
}

void write_series(const SeriesExpansion& series, const std::string& dir) {
  ensure_directory(dir);
  json j;
  j["w"] = series.w;
  j["nu"] = series.nu;
  j["K_max"] = series.K_max;
  j["resonant"] = series.resonant;
  j["warnings"] = series.warnings;
  j["terms"] = json::array();
  for (std::size_t i = 0; i < series.terms.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "term_%02zu.json", i);
    write_field(series.terms[i].coeff, dir + "/" + name);
    j["terms"].push_back({{"k", series.terms[i].k}, {"l", series.terms[i].l}, {"file", name}});
  }
  write_text(dir + "/series.json", j.dump(2) + "\n");
}

std::string fit_report_json(const SingularityFit& fit, double w) {
  json j;
  j["w"] = w;
  j["nu"] = nu_index(w);
  j["condition"] = fit.condition;
  j["max_residual"] = fit.max_residual;
  j["basis"] = json::array();
  for (const auto& t : fit.terms) j["basis"].push_back({{"k", t.k}, {"l", t.l}});
  j["modes"] = json::array();
  const auto& g = fit.data.psi1.geometry();
  for (std::size_t m = 0; m < fit.modes.size(); ++m) {
    const std::size_t i = fit.modes[m];
    const auto p1 = fit.data.psi1.at(i), p2 = fit.data.psi2.at(i);
    if (p1 == 0.0 && p2 == 0.0 && fit.residual[m] == 0.0) continue;
    const auto n = g.wavenumber(i);
    j["modes"].push_back({{"n", {n[0], n[1], n[2]}},
                          {"psi1", {p1.real(), p1.imag()}},
                          {"psi2", {p2.real(), p2.imag()}},
                          {"residual", fit.residual[m]}});
  }
  return j.dump(2) + "\n";
}

}  // namespace pertasym
