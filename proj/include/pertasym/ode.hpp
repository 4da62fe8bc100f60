#pragma once

// Dormand-Prince 8(5,3) explicit Runge-Kutta integrator with adaptive step
// size control. Steps are shortened to land exactly on requested output times.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>

#include "pertasym/error.hpp"

namespace pertasym::ode {

namespace tableau {
inline constexpr std::array<double, 12> kC{0.0, 0.05260015195876773, 0.0789002279381516, 0.1183503419072274, 0.2816496580927726, 0.3333333333333333, 0.25, 0.3076923076923077, 0.6512820512820513, 0.6, 0.8571428571428571, 1.0};

inline constexpr std::array<std::array<double, 12>, 12> kA{{
    {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.05260015195876773, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.0197250569845379, 0.0591751709536137, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.02958758547680685, 0.0, 0.08876275643042054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.037037037037037035, 0.0, 0.0, 0.17082860872947386, 0.12546768756682242, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.037109375, 0.0, 0.0, 0.17025221101954405, 0.06021653898045596, -0.017578125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.03709200011850479, 0.0, 0.0, 0.17038392571223998, 0.10726203044637328, -0.015319437748624402, 0.008273789163814023, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.6241109587160757, 0.0, 0.0, -3.3608926294469414, -0.868219346841726, 27.59209969944671, 20.154067550477894, -43.48988418106996, 0.0, 0.0, 0.0, 0.0},
    {0.47766253643826434, 0.0, 0.0, -2.4881146199716677, -0.590290826836843, 21.230051448181193, 15.279233632882423, -33.28821096898486, -0.020331201708508627, 0.0, 0.0, 0.0},
    {-0.9371424300859873, 0.0, 0.0, 5.186372428844064, 1.0914373489967295, -8.149787010746927, -18.52006565999696, 22.739487099350505, 2.4936055526796523, -3.0467644718982196, 0.0, 0.0},
    {2.273310147516538, 0.0, 0.0, -10.53449546673725, -2.0008720582248625, -17.9589318631188, 27.94888452941996, -2.8589982771350235, -8.87285693353063, 12.360567175794303, 0.6433927460157636, 0.0}}};

inline constexpr std::array<double, 12> kB{0.054293734116568765, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, 0.3111643669578199, -0.1521609496625161, 0.20136540080403034, 0.04471061572777259};

inline constexpr std::array<double, 13> kE3{-0.18980075407240762, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, -0.4226823213237919, -0.1521609496625161, 0.20136540080403034, 0.02265179219836082, 0.0};

inline constexpr std::array<double, 13> kE5{0.01312004499419488, 0.0, 0.0, 0.0, 0.0, -1.2251564463762044, -0.4957589496572502, 1.6643771824549864, -0.35032884874997366, 0.3341791187130175, 0.08192320648511571, -0.022355307863886294, 0.0};
}  // namespace tableau

template <std::size_t N>
using State = std::array<double, N>;

struct Options {
  double rtol = 1e-10;
  double atol = 1e-12;
  double first_step = 0.0;  // 0 selects automatically
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 5'000'000;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_calls = 0;
};

// Componentwise scale atol + rtol * max(|y|, |y_new|).
template <std::size_t N>
struct MixedScale {
  double rtol;
  double atol;
  State<N> operator()(double, const State<N>& y, const State<N>& y_new) const {
    State<N> s;
    for (std::size_t i = 0; i < N; ++i)
      s[i] = atol + rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
    return s;
  }
};

namespace detail {

template <std::size_t N>
double rms(const State<N>& v, const State<N>& scale) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double q = v[i] / scale[i];
    s += q * q;
  }
  return std::sqrt(s / static_cast<double>(N));
}

}  // namespace detail

// Integrates y' = rhs(t, y) from t0 through the monotone sequence touts, which
// must all lie on one side of t0, calling on_output(index, t, y) at each.
// scale(t, y, y_new) returns the per-component error scale.
template <std::size_t N, class Rhs, class Scale, class Out>
Stats integrate(Rhs&& rhs, double t0, State<N> y, std::span<const double> touts,
                const Options& opt, Scale&& scale, Out&& on_output) {
  using tableau::kA;
  using tableau::kB;
  using tableau::kC;
  using tableau::kE3;
  using tableau::kE5;
  constexpr double kSafety = 0.9;
  constexpr double kMinFactor = 0.2;
  constexpr double kMaxFactor = 10.0;
  constexpr double kExponent = -1.0 / 8.0;

  Stats stats;
  if (touts.empty()) return stats;
  const double t_last = touts.back();
  const double dir = t_last >= t0 ? 1.0 : -1.0;

  double t = t0;
  State<N> f = rhs(t, y);
  ++stats.rhs_calls;

  std::size_t next = 0;
  while (next < touts.size() && touts[next] == t) {
    on_output(next, t, y);
    ++next;
  }
  if (next == touts.size()) return stats;

  double h_abs = opt.first_step;
  if (h_abs <= 0.0) {
    const State<N> sc = scale(t, y, y);
    const double d0 = detail::rms(y, sc);
    const double d1 = detail::rms(f, sc);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, std::abs(t_last - t));
    State<N> y1;
    for (std::size_t i = 0; i < N; ++i) y1[i] = y[i] + h0 * dir * f[i];
    const State<N> f1 = rhs(t + h0 * dir, y1);
    ++stats.rhs_calls;
    State<N> df;
    for (std::size_t i = 0; i < N; ++i) df[i] = f1[i] - f[i];
    const double d2 = detail::rms(df, sc) / h0;
    const double h1 = (d1 <= 1e-15 && d2 <= 1e-15)
                          ? std::max(1e-6, h0 * 1e-3)
                          : std::pow(0.01 / std::max(d1, d2), 1.0 / 8.0);
    h_abs = std::min(100.0 * h0, h1);
  }
  h_abs = std::min(h_abs, opt.max_step);

  bool last_rejected = false;
  std::array<State<N>, 13> K;
  while (next < touts.size()) {
    if (stats.accepted + stats.rejected >= opt.max_steps)
      fail(ErrorKind::Stiffness, "step budget exhausted at t=" + std::to_string(t));
    const double t_target = touts[next];
    const double min_step =
        10.0 * std::abs(std::nextafter(t, dir * std::numeric_limits<double>::infinity()) - t);
    if (h_abs < min_step)
      fail(ErrorKind::Stiffness, "step size underflow at t=" + std::to_string(t));

    bool landing = false;
    double h = h_abs * dir;
    if (dir * (t + h - t_target) >= 0.0) {
      h = t_target - t;
      landing = true;
    }
    const double t_new = landing ? t_target : t + h;

    K[0] = f;
    for (std::size_t s = 1; s < 12; ++s) {
      State<N> ys = y;
      for (std::size_t j = 0; j < s; ++j) {
        const double a = kA[s][j];
        if (a == 0.0) continue;
        for (std::size_t i = 0; i < N; ++i) ys[i] += h * a * K[j][i];
      }
      K[s] = rhs(t + kC[s] * h, ys);
    }
    State<N> y_new = y;
    for (std::size_t j = 0; j < 12; ++j) {
      const double b = kB[j];
      if (b == 0.0) continue;
      for (std::size_t i = 0; i < N; ++i) y_new[i] += h * b * K[j][i];
    }
    K[12] = rhs(t_new, y_new);
    stats.rhs_calls += 12;

    const State<N> sc = scale(t_new, y, y_new);
    double e5 = 0.0, e3 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      double s5 = 0.0, s3 = 0.0;
      for (std::size_t j = 0; j < 13; ++j) {
        s5 += K[j][i] * kE5[j];
        s3 += K[j][i] * kE3[j];
      }
      s5 /= sc[i];
      s3 /= sc[i];
      e5 += s5 * s5;
      e3 += s3 * s3;
    }
    double err = 0.0;
    if (e5 != 0.0 || e3 != 0.0)
      err = std::abs(h) * e5 / std::sqrt((e5 + 0.01 * e3) * static_cast<double>(N));
    if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();

    const double taken = std::abs(h);
    if (err < 1.0) {
      double factor = err == 0.0 ? kMaxFactor
                                 : std::min(kMaxFactor, kSafety * std::pow(err, kExponent));
      if (last_rejected) factor = std::min(1.0, factor);
      last_rejected = false;
      // a short landing step says little about the step the solution allows
      if (!(landing && taken < 0.5 * h_abs)) h_abs = taken * factor;
      h_abs = std::min(h_abs, opt.max_step);
      t = t_new;
      y = y_new;
      f = K[12];
      ++stats.accepted;
      if (landing) {
        on_output(next, t, y);
        ++next;
        while (next < touts.size() && touts[next] == t) {
          on_output(next, t, y);
          ++next;
        }
      }
    } else {
      h_abs = taken * std::max(kMinFactor, kSafety * std::pow(err, kExponent));
      last_rejected = true;
      ++stats.rejected;
    }
  }
  return stats;
}

}  // namespace pertasym::ode
