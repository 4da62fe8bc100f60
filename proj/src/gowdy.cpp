#include "pertasym/gowdy.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <complex>

#include "pertasym/error.hpp"
#include "pertasym/ode.hpp"
#include "pertasym/parallel.hpp"
#include "pertasym/spectral.hpp"

namespace pertasym {

std::array<double, 2> gowdy_series(double n2, double k, double omega, double t, double K_max) {
  if (!(t > 0.0)) fail(ErrorKind::Domain, "Gowdy series needs t > 0");
  if (!(K_max >= 0.0)) fail(ErrorKind::Domain, "K_max must be >= 0");
  const double lg = std::log(t);
  double a = omega, b = k;
  double P = a + b * lg, Pt = b / t;
  for (int p = 2; p <= K_max; p += 2) {
    // p^2 b_p = -n2 b_{p-2};  p^2 a_p + 2 p b_p = -n2 a_{p-2}
    const double bn = -n2 * b / (p * p);
    const double an = (-n2 * a - 2.0 * p * bn) / (p * p);
    a = an;
    b = bn;
    const double tp = std::pow(t, p);
    P += (a + b * lg) * tp;
    Pt += (p * (a + b * lg) + b) * tp / t;
  }
  return {P, Pt};
}

namespace {

struct Transfer2 {
  double m00 = 1.0, m01 = 0.0, m10 = 0.0, m11 = 1.0;
};

std::vector<Transfer2> gowdy_transfers(double n2, double t0, std::span<const double> ts,
                                       double tol) {
  std::vector<Transfer2> out(ts.size());
  if (n2 == 0.0) {
    // P = A + B log t
    for (std::size_t i = 0; i < ts.size(); ++i)
      out[i] = {1.0, t0 * std::log(ts[i] / t0), 0.0, t0 / ts[i]};
    return out;
  }
  std::vector<std::size_t> fwd, bwd;
  for (std::size_t i = 0; i < ts.size(); ++i) (ts[i] >= t0 ? fwd : bwd).push_back(i);
  std::sort(fwd.begin(), fwd.end(), [&](auto a, auto b) { return ts[a] < ts[b]; });
  std::sort(bwd.begin(), bwd.end(), [&](auto a, auto b) { return ts[a] > ts[b]; });
  using Y = ode::State<4>;
  auto rhs = [&](double s, const Y& y) -> Y {
    const double t = std::exp(s);
    return {t * y[1], -y[1] - t * n2 * y[0], t * y[3], -y[3] - t * n2 * y[2]};
  };
  auto scale = [&](double s, const Y& y, const Y& yn) -> Y {
    const double t = std::exp(s);
    const double kap = std::sqrt(n2 + 1.0 / (t * t));
    Y sc;
    for (int c = 0; c < 2; ++c) {
      const double r = std::max(std::hypot(y[2 * c], y[2 * c + 1] / kap),
                                std::hypot(yn[2 * c], yn[2 * c + 1] / kap));
      sc[2 * c] = tol * r + 1e-300;
      sc[2 * c + 1] = kap * sc[2 * c];
    }
    return sc;
  };
  ode::Options o;
  o.rtol = tol;
  o.atol = 0.0;
  for (const auto* list : {&fwd, &bwd}) {
    if (list->empty()) continue;
    std::vector<double> us;
    for (std::size_t i : *list) us.push_back(std::log(ts[i]));
    ode::integrate<4>(rhs, std::log(t0), Y{1.0, 0.0, 0.0, 1.0}, us, o, scale,
                      [&](std::size_t j, double, const Y& y) {
                        out[(*list)[j]] = {y[0], y[2], y[1], y[3]};
                      });
  }
  return out;
}

using cd = std::complex<double>;

std::vector<cd> forward_1d(const Dft& dft, std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<double> re(v.begin(), v.end()), im(n, 0.0), ore(n), oim(n);
  dft.forward_lines(re.data(), im.data(), 1, ore.data(), oim.data());
  std::vector<cd> c(n);
  for (std::size_t j = 0; j < n; ++j) c[j] = {ore[j], oim[j]};
  return c;
}

std::vector<double> inverse_1d(const Dft& dft, const std::vector<cd>& c) {
  const std::size_t n = c.size();
  std::vector<double> re(n), im(n), ore(n), oim(n);
  for (std::size_t j = 0; j < n; ++j) {
    re[j] = c[j].real();
    im[j] = c[j].imag();
  }
  dft.inverse_lines(re.data(), im.data(), 1, ore.data(), oim.data());
  return ore;
}

double max_rel_error(std::span<const double> fit, std::span<const double> ref) {
  double e = 0.0, s = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    e = std::max(e, std::abs(fit[i] - ref[i]));
    s = std::max(s, std::abs(ref[i]));
  }
  return s > 0.0 ? e / s : e;
}

}  // namespace

GowdyResult gowdy_evolve_and_prescribe(std::span<const double> k, std::span<const double> omega,
                                       double t_start, double t_end, const GowdyOptions& opt) {
  const std::size_t n = k.size();
  if (n != omega.size()) fail(ErrorKind::Domain, "k and omega need the same length");
  if (n < 3 || n % 2 == 0) fail(ErrorKind::Domain, "Gowdy grid size must be odd and >= 3");
  if (!(t_start > 0.0 && t_start < 1.0)) fail(ErrorKind::Domain, "t_start must lie in (0, 1)");
  if (!(t_end > t_start)) fail(ErrorKind::Domain, "t_end must exceed t_start");
  if (opt.fit_samples < 6) fail(ErrorKind::Domain, "need at least 6 fit samples");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(k[i]) || !std::isfinite(omega[i]))
      fail(ErrorKind::Data, "non-finite Gowdy data");

  const Dft dft(static_cast<int>(n));
  const int h = static_cast<int>(n - 1) / 2;
  const auto kc = forward_1d(dft, k);
  const auto wc = forward_1d(dft, omega);

  std::vector<double> window(opt.fit_samples);
  const double lo = std::log(t_start), hi = std::log(opt.fit_span * t_start);
  for (int i = 0; i < opt.fit_samples; ++i)
    window[i] = std::exp(lo + (hi - lo) * i / (opt.fit_samples - 1));

  // per |n|: forward transfer and the transfers back to the window
  std::vector<Transfer2> fwd(h + 1);
  std::vector<std::vector<Transfer2>> back(h + 1);
  parallel_for(static_cast<std::size_t>(h + 1), [&](std::size_t m) {
    const double n2 = static_cast<double>(m * m);
    const double te[] = {t_end};
    fwd[m] = gowdy_transfers(n2, t_start, te, opt.tol)[0];
    back[m] = gowdy_transfers(n2, t_end, window, opt.tol);
  });

  GowdyResult r;
  r.N = static_cast<int>(n);
  r.t_start = t_start;
  r.t_end = t_end;
  std::vector<cd> Pe(n), Pte(n);
  // samples[row][mode]: P rows then t P_t rows
  const std::size_t ns = window.size();
  Eigen::MatrixXcd B(2 * ns, n);
  for (std::size_t j = 0; j < n; ++j) {
    const int m = std::abs(static_cast<int>(j) - h);
    const double n2 = static_cast<double>(m) * m;
    const auto sr = gowdy_series(n2, kc[j].real(), wc[j].real(), t_start, opt.K_max);
    const auto si = gowdy_series(n2, kc[j].imag(), wc[j].imag(), t_start, opt.K_max);
    const cd P0{sr[0], si[0]}, Pt0{sr[1], si[1]};
    const auto& T = fwd[m];
    Pe[j] = T.m00 * P0 + T.m01 * Pt0;
    Pte[j] = T.m10 * P0 + T.m11 * Pt0;
    for (std::size_t i = 0; i < ns; ++i) {
      const auto& U = back[m][i];
      B(i, j) = U.m00 * Pe[j] + U.m01 * Pte[j];
      B(ns + i, j) = window[i] * (U.m10 * Pe[j] + U.m11 * Pte[j]);
    }
  }
  r.P = inverse_1d(dft, Pe);
  r.Pt = inverse_1d(dft, Pte);

  // basis t^p (log t)^l for (p, l) in {(0,1), (0,0), (2,1), (2,0), (4,1), (4,0)}
  const int pw[] = {0, 0, 2, 2, 4, 4};
  const int lw[] = {1, 0, 1, 0, 1, 0};
  Eigen::MatrixXd A(2 * ns, 6);
  for (std::size_t i = 0; i < ns; ++i) {
    const double t = window[i], lg = std::log(t);
    for (int c = 0; c < 6; ++c) {
      const double tp = std::pow(t, pw[c]);
      A(i, c) = tp * (lw[c] ? lg : 1.0);
      A(ns + i, c) = tp * (lw[c] ? pw[c] * lg + 1.0 : pw[c]);
    }
  }
  Eigen::VectorXd cs(6);
  for (int c = 0; c < 6; ++c) {
    cs(c) = A.col(c).norm();
    A.col(c) /= cs(c);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  r.fit_condition = svd.singularValues()(0) / svd.singularValues()(5);
  if (!(r.fit_condition <= 1e12))
    fail(ErrorKind::IllConditioned, "Gowdy fit basis is ill-conditioned; widen the window");
  const Eigen::MatrixXd Xr = svd.solve(Eigen::MatrixXd(B.real()));
  const Eigen::MatrixXd Xi = svd.solve(Eigen::MatrixXd(B.imag()));
  std::vector<cd> kf(n), wf(n);
  for (std::size_t j = 0; j < n; ++j) {
    kf[j] = {Xr(0, j) / cs(0), Xi(0, j) / cs(0)};
    wf[j] = {Xr(1, j) / cs(1), Xi(1, j) / cs(1)};
  }
  r.k_fit = inverse_1d(dft, kf);
  r.omega_fit = inverse_1d(dft, wf);
  r.k_error = max_rel_error(r.k_fit, k);
  r.omega_error = max_rel_error(r.omega_fit, omega);
  return r;
}

}  // namespace pertasym
