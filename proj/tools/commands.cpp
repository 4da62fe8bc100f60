#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "cli.hpp"
#include "pertasym/background.hpp"
#include "pertasym/error.hpp"
#include "pertasym/gowdy.hpp"
#include "pertasym/io.hpp"
#include "pertasym/latetime.hpp"
#include "pertasym/singularity.hpp"

namespace cli {

using namespace pertasym;

namespace {

constexpr Field kSeed{"seed", Kind::Unsigned};
constexpr Field kOut{"out", Kind::String};

std::string path(const Context& c, const std::string& name) { return c.out + "/" + name; }

void write_json(const Context& c, const std::string& name, const ordered_json& j) {
  write_text(path(c, name), j.dump(2) + "\n");
}

double max_rel(const SpectralField& a, const SpectralField& b) {
  double m = 0.0, s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a.at(i) - b.at(i)));
    s = std::max(s, std::abs(b.at(i)));
  }
  return s > 0.0 ? m / s : m;
}

double max_abs(const SpectralField& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.at(i)));
  return m;
}

double positive(const json& j, const char* key, double fallback, const char* where) {
  const double v = number(j, key, fallback);
  if (!(v > 0.0)) fail(ErrorKind::Config, std::string(where) + ": \"" + key + "\" must be positive");
  return v;
}

std::vector<double> sorted_positive(const json& j, const char* key, const char* where) {
  auto v = number_array(j, key);
  if (v.empty()) fail(ErrorKind::Config, std::string(where) + ": \"" + key + "\" must not be empty");
  for (double x : v)
    if (!(x > 0.0)) fail(ErrorKind::Config, std::string(where) + ": \"" + key + "\" entries must be positive");
  return v;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<double> geometric(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a * std::pow(b / a, static_cast<double>(i) / (n - 1));
  return v;
}

void validate_pair(const json& j, const char* a, const char* b, const std::string& where) {
  validate(j, {{a, Kind::Object, true}, {b, Kind::Object, true}}, where);
  validate_field_spec(j.at(a), where + "." + a);
  validate_field_spec(j.at(b), where + "." + b);
}

double wave_speed_max(const TorusGeometry& g, const PerturbationState& s) {
  int n2 = 0;
  for (std::size_t i : active_modes(s)) n2 = std::max(n2, g.n2(i));
  return g.kscale() * std::sqrt(static_cast<double>(n2));
}

}  // namespace

void cmd_bg(const Context& c) {
  const auto& j = c.config;
  validate(j,
           {{"eos", Kind::Object, true},
            {"eta_range", Kind::NumberArray, true},
            {"a0", Kind::Number},
            {"eps0", Kind::Number},
            {"eta0", Kind::Number},
            {"tol", Kind::Number},
            {"G", Kind::Number},
            {"tau", Kind::Bool},
            kSeed,
            kOut},
           "bg config");
  const auto eos = parse_eos(j.at("eos"));
  const auto range = number_array(j, "eta_range");
  if (range.size() != 2 || !(range[0] > 0.0 && range[1] > range[0]))
    fail(ErrorKind::Config, "bg config: eta_range must be [lo, hi] with 0 < lo < hi");
  const double a0 = positive(j, "a0", 1.0, "bg config"), eps0 = positive(j, "eps0", 1.0, "bg config");
  const double G = positive(j, "G", kDefaultG, "bg config"), tol = positive(j, "tol", 1e-10, "bg config");
  const double eta0 = j.contains("eta0") ? positive(j, "eta0", 1.0, "bg config")
                                         : singularity_conformal_time(eos, a0, eps0, G);
  auto traj = solve_background(eos, eta0, a0, eps0, {range[0], range[1]}, tol, G);
  if (j.value("tau", !eos.is_dust())) traj = tau_time(traj);

  ensure_directory(c.out);
  write_background_csv(traj, path(c, "background.csv"));

  ordered_json s;
  s["eos"] = eos.describe();
  s["eta0"] = eta0;
  s["a0"] = a0;
  s["eps0"] = eps0;
  s["samples"] = traj.samples().size();
  s["max_constraint_residual"] = traj.max_constraint_residual();
  try {
    const auto rc = classify_regime(eos);
    s["regime"] = to_string(rc.regime);
    if (rc.sigma) s["sigma"] = *rc.sigma;
  } catch (const Error& e) {
    s["regime"] = nullptr;
    s["regime_note"] = e.what();
  }
  if (traj.tau_limit()) {
    s["tau_inf"] = traj.tau_limit()->tau_inf;
    s["tau_inf_rel_change"] = traj.tau_limit()->relative_change();
  }
  if (const auto* lin = std::get_if<LinearEos>(&eos.variant())) {
    double ea = 0.0, eh = 0.0;
    for (const auto& st : traj.samples()) {
      const auto cf = background_closed_form_linear(lin->w, eta0, a0, st.eta, G);
      ea = std::max(ea, std::abs(st.a / cf.a - 1.0));
      eh = std::max(eh, std::abs(st.H / cf.H - 1.0));
    }
    s["closed_form_max_rel_err_a"] = ea;
    s["closed_form_max_rel_err_H"] = eh;
  }
  double lo = INFINITY, hi = 0.0;
  for (const auto& st : traj.samples()) {
    const double ma3 = st.m * st.a * st.a * st.a;
    lo = std::min(lo, ma3);
    hi = std::max(hi, ma3);
  }
  if (hi > 0.0 && std::isfinite(lo)) s["m_a3_rel_spread"] = (hi - lo) / hi;
  write_json(c, "summary.json", s);
}

void cmd_evolve(const Context& c) {
  const auto& j = c.config;
  validate(j,
           {{"w", Kind::Number},
            {"eos", Kind::Object},
            {"a0", Kind::Number},
            {"eps0", Kind::Number},
            {"geometry", Kind::Object, true},
            {"initial", Kind::Object, true},
            {"eta0", Kind::Number},
            {"etas", Kind::NumberArray, true},
            {"tol", Kind::Number},
            kSeed,
            kOut},
           "evolve config");
  if (j.contains("w") == j.contains("eos"))
    fail(ErrorKind::Config, "evolve config: give exactly one of \"w\" or \"eos\"");
  const auto g = parse_geometry(j.at("geometry"));
  validate_pair(j.at("initial"), "phi", "dphi", "evolve config.initial");
  const auto etas = sorted_positive(j, "etas", "evolve config");
  const double eta0 = positive(j, "eta0", 1.0, "evolve config");
  const double tol = positive(j, "tol", 1e-10, "evolve config");
  std::optional<EquationOfState> eos;
  if (j.contains("eos")) eos = parse_eos(j.at("eos"));
  const double w = j.value("w", 0.0);
  if (!eos && !(w >= 0.0 && w <= 1.0)) fail(ErrorKind::Config, "evolve config: w must lie in [0, 1]");

  std::mt19937_64 rng(c.seed);
  PerturbationState s;
  s.eta = eta0;
  s.phi = build_field(j.at("initial").at("phi"), g, rng);
  s.dphi = build_field(j.at("initial").at("dphi"), g, rng);

  ensure_directory(c.out);
  if (!eos) {
    write_snapshots(evolve_snapshots(s, WaveModel::linear(w), etas, {tol}), w, c.out);
    return;
  }
  const double lo = std::min(eta0, *std::min_element(etas.begin(), etas.end()));
  const double hi = std::max(eta0, *std::max_element(etas.begin(), etas.end()));
  auto bg = std::make_shared<BackgroundTrajectory>(solve_background(
      *eos, eta0, positive(j, "a0", 1.0, "evolve config"), positive(j, "eps0", 1.0, "evolve config"),
      {lo * 0.999, hi * 1.001}, std::min(tol, 1e-10)));
  const auto snaps = evolve_snapshots(s, WaveModel::general(bg), etas, {tol});
  CsvWriter csv(path(c, "snapshots.csv"), "eta,mean_phi,l2_phi");
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "snap_%04zu", i);
    write_field(snaps[i].phi, path(c, std::string(name) + "_phi.json"));
    write_field(snaps[i].dphi, path(c, std::string(name) + "_dphi.json"));
    csv << snaps[i].eta << snaps[i].phi.mean() << std::sqrt(snaps[i].phi.norm2());
    csv.end_row();
  }
  csv.close();
}

namespace {

void sing_build(const Context& c) {
  const auto& j = c.config;
  validate(j,
           {{"w", Kind::Number, true},
            {"geometry", Kind::Object, true},
            {"data", Kind::Object, true},
            {"K_max", Kind::Number},
            kSeed,
            kOut},
           "sing build config");
  const auto g = parse_geometry(j.at("geometry"));
  validate_pair(j.at("data"), "psi1", "psi2", "sing build config.data");
  std::mt19937_64 rng(c.seed);
  SingularityData d{build_field(j.at("data").at("psi1"), g, rng),
                    build_field(j.at("data").at("psi2"), g, rng)};
  const auto s = build_series(j.at("w"), d, number(j, "K_max", 8.0));
  write_series(s, c.out);
}

void sing_fit(const Context& c) {
  const auto& j = c.config;
  validate(j,
           {{"w", Kind::Number, true},
            {"geometry", Kind::Object, true},
            {"snapshots", Kind::Array, true},
            {"K_fit", Kind::Integer},
            kSeed,
            kOut},
           "sing fit config");
  const auto g = parse_geometry(j.at("geometry"));
  for (const auto& s : j.at("snapshots"))
    validate(s, {{"eta", Kind::Number, true}, {"phi", Kind::String, true}, {"dphi", Kind::String, true}},
             "sing fit config.snapshots[]");
  std::vector<PerturbationState> samples;
  for (const auto& s : j.at("snapshots")) {
    PerturbationState st{s.at("eta"), read_spectral(s.at("phi")), read_spectral(s.at("dphi"))};
    if (!(st.phi.geometry() == g) || !(st.dphi.geometry() == g))
      fail(ErrorKind::Config, "sing fit config: snapshot geometry does not match");
    samples.push_back(std::move(st));
  }
  FitOptions opt;
  opt.K_fit = j.value("K_fit", opt.K_fit);
  const double w = j.at("w");
  const auto fit = fit_asymptotic_data(samples, w, opt);
  ensure_directory(c.out);
  write_text(path(c, "fit.json"), fit_report_json(fit, w));
  write_field(fit.data.psi1, path(c, "psi1.json"));
  write_field(fit.data.psi2, path(c, "psi2.json"));
}

void sing_roundtrip(const Context& c) {
  const auto& j = c.config;
  validate(j,
           {{"w", Kind::Number},
            {"ws", Kind::NumberArray},
            {"geometry", Kind::Object, true},
            {"data", Kind::Object},
            {"K_max", Kind::Number},
            {"K_fit", Kind::Integer},
            {"eta_start", Kind::Number},
            {"tol", Kind::Number},
            kSeed,
            kOut},
           "sing roundtrip config");
  if (j.contains("w") == j.contains("ws"))
    fail(ErrorKind::Config, "sing roundtrip config: give exactly one of \"w\" or \"ws\"");
  const auto ws = j.contains("ws") ? number_array(j, "ws") : std::vector<double>{j.at("w").get<double>()};
  const auto g = parse_geometry(j.at("geometry"));
  const json rnd = {{"type", "random"}};
  const json data = j.value("data", json{{"psi1", rnd}, {"psi2", rnd}});
  validate_pair(data, "psi1", "psi2", "sing roundtrip config.data");
  ReconstructOptions ro;
  ro.K_max = number(j, "K_max", ro.K_max);
  ro.eta_start = positive(j, "eta_start", ro.eta_start, "sing roundtrip config");
  ro.tol = positive(j, "tol", ro.tol, "sing roundtrip config");
  FitOptions fo;
  fo.K_fit = j.value("K_fit", fo.K_fit);

  std::mt19937_64 rng(c.seed);
  const SingularityData d{build_field(data.at("psi1"), g, rng), build_field(data.at("psi2"), g, rng)};
  const double lead = std::max(max_abs(d.psi1), max_abs(d.psi2));
  ordered_json out;
  out["eta_start"] = ro.eta_start;
  out["K_max"] = ro.K_max;
  out["results"] = ordered_json::array();
  double worst = 0.0;
  for (double w : ws) {
    const auto samples = reconstruct_samples(w, d, default_fit_window(), ro);
    const auto fit = fit_asymptotic_data(samples, w, fo);
    ordered_json r;
    r["w"] = w;
    r["nu"] = nu_index(w);
    r["resonant"] = nu_is_integer(w);
    const double e1 = max_rel(fit.data.psi1, d.psi1), e2 = max_rel(fit.data.psi2, d.psi2);
    r["psi1_rel_err"] = e1;
    r["psi2_rel_err"] = e2;
    r["max_rel_err"] = std::max(e1, e2);
    worst = std::max({worst, e1, e2});
    r["condition"] = fit.condition;
    if (const auto* log0 = fit.find(0.0, 1)) {
      const double amp = max_abs(log0->coeff);
      r["log_amplitude"] = amp / lead;
      if (nu_is_integer(w) && w > 0.0) {
        const auto s = build_series(w, d, ro.K_max);
        const auto expect = (w / (2.0 * nu_index(w))) * laplacian(s.find(-2.0, 0)->coeff);
        r["log_rel_dev"] = std::sqrt((log0->coeff - expect).norm2() / expect.norm2());
        r["log_terms_present"] = amp > 1e-6 * lead;
      } else {
        r["log_terms_present"] = amp > 1e-6 * lead;
      }
    }
    out["results"].push_back(r);
  }
  out["max_rel_err"] = worst;
  ensure_directory(c.out);
  write_json(c, "roundtrip.json", out);
}

}  // namespace

void cmd_sing(const Context& c, const std::string& mode) {
  if (mode == "build") return sing_build(c);
  if (mode == "fit") return sing_fit(c);
  if (mode == "roundtrip") return sing_roundtrip(c);
  if (mode == "gowdy") return cmd_gowdy(c);
  fail(ErrorKind::Config, "sing: unknown mode \"" + mode + "\" (build, fit, roundtrip, gowdy)");
}

namespace {

void validate_late_initial(const json& j, const std::string& where) {
  if (j.contains("initial")) validate_pair(j.at("initial"), "phi", "dphi", where + ".initial");
}

PerturbationState late_initial(const Context& c, const TorusGeometry& g, double eta0, bool zero_mean) {
  const json rnd = {{"type", "random"}, {"zero_mean", zero_mean}};
  const json init = c.config.value("initial", json{{"phi", rnd}, {"dphi", rnd}});
  std::mt19937_64 rng(c.seed);
  PerturbationState s;
  s.eta = eta0;
  s.phi = build_field(init.at("phi"), g, rng, zero_mean);
  s.dphi = build_field(init.at("dphi"), g, rng, zero_mean);
  return s;
}

ordered_json profile_json(const WaveProfile& p, const TorusGeometry& g, double speed) {
  ordered_json r;
  r["time_variable"] = to_string(p.time_variable);
  r["A"] = p.A;
  r["B"] = p.B;
  r["modes"] = p.modes.size();
  r["max_residual"] = p.max_residual;
  double slope_err = 0.0, drift = 0.0;
  for (const auto& m : p.modes) {
    const double k = g.kscale() * std::sqrt(static_cast<double>(m.k[0] * m.k[0] + m.k[1] * m.k[1] + m.k[2] * m.k[2]));
    slope_err = std::max(slope_err, std::abs(m.slope / (-speed * k) - 1.0));
    drift = std::max(drift, m.drift);
  }
  r["max_slope_rel_err"] = slope_err;
  r["max_drift_C"] = drift;
  r["warnings"] = p.warnings;
  return r;
}

double max_profile_change(const WaveProfile& a, const WaveProfile& b, double w) {
  const auto& g = a.geometry;
  double e = 0.0;
  for (const auto& m : a.modes) {
    const double om = std::sqrt(w) * g.kscale() *
                      std::sqrt(static_cast<double>(m.k[0] * m.k[0] + m.k[1] * m.k[1] + m.k[2] * m.k[2]));
    const auto* q = b.find(m.k);
    const std::complex<double> za = std::polar(m.Wbar, om * m.etabar);
    const std::complex<double> zb = q ? std::polar(q->Wbar, om * q->etabar) : 0.0;
    e = std::max(e, std::abs(za - zb) / m.Wbar);
  }
  return e;
}

void late_extract(const Context& c) {
  const auto& j = c.config;
  validate(j,
           {{"w", Kind::Number},
            {"eos", Kind::Object},
            {"a0", Kind::Number},
            {"eps0", Kind::Number},
            {"geometry", Kind::Object, true},
            {"initial", Kind::Object},
            {"eta0", Kind::Number},
            {"eta_max", Kind::Number, true},
            {"samples", Kind::Unsigned},
            {"etas", Kind::NumberArray},
            {"tol", Kind::Number},
            {"residual_threshold", Kind::Number},
            {"stability_eta_far", Kind::NumberArray},
            kSeed,
            kOut},
           "late extract config");
  if (j.contains("w") == j.contains("eos"))
    fail(ErrorKind::Config, "late extract config: give exactly one of \"w\" or \"eos\"");
  const auto g = parse_geometry(j.at("geometry"));
  validate_late_initial(j, "late extract config");
  const double eta0 = positive(j, "eta0", 1.0, "late extract config");
  const double eta_max = positive(j, "eta_max", 1.0, "late extract config");
  if (!(eta_max > 10.0 * eta0)) fail(ErrorKind::Config, "late extract config: eta_max must exceed 10 eta0");
  const double tol = positive(j, "tol", 1e-11, "late extract config");
  const std::size_t n = j.value("samples", std::size_t{200});
  ExtractOptions xo;
  xo.residual_threshold = positive(j, "residual_threshold", xo.residual_threshold, "late extract config");
  xo.min_samples = std::min<std::size_t>(xo.min_samples, n);
  std::vector<double> far;
  if (j.contains("stability_eta_far")) far = sorted_positive(j, "stability_eta_far", "late extract config");

  ensure_directory(c.out);
  if (j.contains("w")) {
    const double w = j.at("w");
    const auto s = late_initial(c, g, eta0, true);
    const auto window = late_window(eta_max, std::sqrt(w) * wave_speed_max(g, s), n);
    const auto modes = active_modes(s);
    const auto tr = track_modes(s, WaveModel::linear(w), window, modes, {tol});
    const auto prof = extract_wave_profile(tr, w, xo);
    write_wave_profile_csv(prof, path(c, "profile.csv"));
    auto r = profile_json(prof, g, std::sqrt(w));
    // decay of the amplitude norm over the window
    std::vector<double> x, y;
    const std::size_t stride = std::max<std::size_t>(1, window.size() / 50);
    for (std::size_t t = 0; t < window.size(); t += stride) {
      double a2 = 0.0;
      for (std::size_t m = 0; m < modes.size(); ++m) {
        if (modes[m] == g.center()) continue;
        a2 += 2.0 * (std::norm(tr.phi[m][t]) + std::norm(tr.dphi[m][t]) / (w * g.k2(modes[m])));
      }
      x.push_back(std::log(window[t]));
      y.push_back(0.5 * std::log(a2));
    }
    r["decay_exponent"] = slope(x, y);
    r["expected_decay_exponent"] = -(nu_index(w) + 0.5);
    if (!far.empty()) {
      ordered_json st = ordered_json::array();
      std::vector<WaveProfile> got;
      for (double f : far) {
        const auto seed = asymptotic_state(prof, w, f);
        const auto t2 = track_modes(seed, WaveModel::linear(w), window, active_modes(seed), {tol});
        got.push_back(extract_wave_profile(t2, w, xo));
        st.push_back({{"eta_far", f}, {"max_rel_change", max_profile_change(prof, got.back(), w)}});
      }
      r["roundtrip"] = st;
      double sweep = 0.0;
      for (std::size_t i = 1; i < got.size(); ++i)
        sweep = std::max(sweep, max_profile_change(got[0], got[i], w));
      r["eta_far_sweep_change"] = sweep;
    }
    write_json(c, "report.json", r);
    return;
  }

  const auto eos = parse_eos(j.at("eos"));
  const auto rc = classify_regime(eos);
  const double a0 = positive(j, "a0", 1.0, "late extract config");
  const double eps0 = positive(j, "eps0", 0.1, "late extract config");
  auto bg = std::make_shared<BackgroundTrajectory>(
      tau_time(solve_background(eos, eta0, a0, eps0, {eta0, eta_max * 1.01}, 1e-11)));
  const auto s = late_initial(c, g, eta0, false);
  const auto modes = active_modes(s);
  std::vector<double> etas;
  if (j.contains("etas")) {
    etas = sorted_positive(j, "etas", "late extract config");
    std::sort(etas.begin(), etas.end());
  } else if (rc.regime == Regime::Overdamped) {
    etas = geometric(eta_max / 100.0, eta_max, 21);
  } else {
    double fp = 0.0;
    for (const auto& st : bg->samples())
      if (st.eta >= eta_max / 10.0) fp = std::max(fp, eos_sound_speed_sq(eos, st.eps));
    etas = late_window(eta_max, std::sqrt(fp) * wave_speed_max(g, s), n);
  }
  const auto tr = track_modes(s, WaveModel::general(bg), etas, modes, {tol});
  GeneralExtractOptions go;
  go.extract = xo;
  const auto res = general_latetime_extract(tr, *bg, go);
  ordered_json r;
  r["regime"] = to_string(rc.regime);
  if (rc.sigma) r["sigma"] = *rc.sigma;
  if (const auto* p = std::get_if<WaveProfile>(&res)) {
    write_wave_profile_csv(*p, path(c, "profile.csv"));
    r["profile"] = profile_json(*p, g, 1.0);
  } else if (const auto* f = std::get_if<FrozenProfile>(&res)) {
    write_frozen_profile(*f, c.out);
  } else {
    const auto& cr = std::get<CriticalReport>(res);
    r["tau_log_slope"] = cr.tau_log_slope;
    r["htilde_min"] = cr.htilde_min;
    r["htilde_max"] = cr.htilde_max;
    r["htilde_variation"] = cr.htilde_variation;
    r["tau_window"] = {cr.tau_start, cr.tau_end};
  }
  write_json(c, "report.json", r);
}

void late_reconstruct(const Context& c) {
  const auto& j = c.config;
  validate(j,
           {{"w", Kind::Number, true},
            {"geometry", Kind::Object, true},
            {"profile", Kind::String, true},
            {"A", Kind::Number},
            {"B", Kind::Number},
            {"eta_far", Kind::Number, true},
            {"eta_target", Kind::Number, true},
            {"tol", Kind::Number},
            {"seed_corrections", Kind::Bool},
            kSeed,
            kOut},
           "late reconstruct config");
  const auto g = parse_geometry(j.at("geometry"));
  const double w = j.at("w");
  if (!(w > 0.0 && w <= 1.0)) fail(ErrorKind::Config, "late reconstruct config: w must lie in (0, 1]");
  auto prof = read_wave_profile_csv(j.at("profile"), g);
  prof.A = number(j, "A", 0.0);
  prof.B = number(j, "B", 0.0);
  ReconstructLateOptions ro;
  ro.tol = positive(j, "tol", ro.tol, "late reconstruct config");
  ro.seed_corrections = j.value("seed_corrections", true);
  const auto st = reconstruct_from_wave_profile(prof, w, positive(j, "eta_far", 1.0, "late reconstruct config"),
                                                positive(j, "eta_target", 1.0, "late reconstruct config"), ro);
  ensure_directory(c.out);
  write_field(st.phi, path(c, "phi.json"));
  write_field(st.dphi, path(c, "dphi.json"));
  ordered_json r;
  r["eta"] = st.eta;
  r["mean_phi"] = st.phi.mean();
  r["zero_mean_amplitude"] = zero_mean_amplitude(st, w);
  write_json(c, "reconstruct.json", r);
}

void late_regimes(const Context& c) {
  const auto& j = c.config;
  validate(j,
           {{"w_values", Kind::NumberArray, true},
            {"sigma_values", Kind::NumberArray, true},
            {"f1", Kind::Number},
            {"measure", Kind::Bool},
            {"eps0", Kind::Number},
            {"eta_max", Kind::Number},
            kSeed,
            kOut},
           "late regimes config");
  const auto ws = number_array(j, "w_values"), ss = number_array(j, "sigma_values");
  const double f1 = positive(j, "f1", 1.0, "late regimes config");
  const bool measure = j.value("measure", false);
  const double eps0 = positive(j, "eps0", 0.01, "late regimes config");
  const double eta_max = positive(j, "eta_max", 1e6, "late regimes config");
  ensure_directory(c.out);
  for (double s : ss)
    if (!(s > 0.0)) fail(ErrorKind::Config, "late regimes config: sigma values must be positive");
  std::string text = measure ? "w,sigma,regime,expected_exponent,measured_exponent,tau_inf\n" : "w,sigma,regime\n";
  for (double w : ws)
    for (double s : ss) {
      const auto eos = EquationOfState::power_law(w, {{f1, 1.0 + s}});
      const auto rc = classify_regime(eos);
      text += fmt_double(w) + "," + fmt_double(s) + "," + to_string(rc.regime);
      if (measure) {
        const double expected = w > 0.0 ? -1.5 * (1.0 + w) : -1.5 * (1.0 - s / 2.0);
        double measured = NAN, tinf = NAN;
        try {
          const auto traj = tau_time(solve_background(eos, 1.0, 1.0, eps0, {1.0, eta_max}, 1e-10));
          if (rc.regime == Regime::Overdamped) {
            tinf = traj.tau_limit()->tau_inf;
          } else {
            std::vector<double> x, y;
            for (const auto& o : omega_damping(traj))
              if (o.eta >= eta_max / 10.0) {
                x.push_back(std::log(o.a));
                y.push_back(std::log(o.Omega));
              }
            measured = slope(x, y);
          }
        } catch (const Error&) {
        }
        text += "," + (rc.regime == Regime::Overdamped ? std::string("nan") : fmt_double(expected)) + "," +
                (std::isnan(measured) ? std::string("nan") : fmt_double(measured)) + "," +
                (std::isnan(tinf) ? std::string("nan") : fmt_double(tinf));
      }
      text += "\n";
    }
  write_text(path(c, "regimes.csv"), text);
}

}  // namespace

void cmd_late(const Context& c, const std::string& mode) {
  if (mode == "extract") return late_extract(c);
  if (mode == "reconstruct") return late_reconstruct(c);
  if (mode == "regimes") return late_regimes(c);
  fail(ErrorKind::Config, "late: unknown mode \"" + mode + "\" (extract, reconstruct, regimes)");
}

void cmd_classify(const Context& c) {
  const auto& j = c.config;
  validate(j, {{"eos", Kind::Object, true}, kSeed, kOut}, "classify config");
  const auto eos = parse_eos(j.at("eos"));
  ordered_json r;
  r["eos"] = eos.describe();
  r["limiting_w"] = eos.limiting_w();
  if (eos.limiting_w() > -1.0 / 3.0) r["nu"] = nu_index(eos.limiting_w());
  try {
    const auto rc = classify_regime(eos);
    r["regime"] = to_string(rc.regime);
    if (rc.sigma) r["sigma"] = *rc.sigma;
  } catch (const Error& e) {
    r["regime"] = nullptr;
    r["regime_note"] = e.what();
  }
  ensure_directory(c.out);
  write_json(c, "classify.json", r);
}

namespace {

std::vector<double> gowdy_profile(const json& j, int N, const char* where) {
  if (j.is_array()) {
    bool ok = static_cast<int>(j.size()) == N;
    for (const auto& v : j) ok = ok && v.is_number() && std::isfinite(v.get<double>());
    if (!ok)
      fail(ErrorKind::Config, std::string(where) + ": grid values need N finite numbers");
    return j.get<std::vector<double>>();
  }
  validate(j, {{"const", Kind::Number}, {"cos", Kind::NumberArray}, {"sin", Kind::NumberArray}}, where);
  const double c0 = number(j, "const", 0.0);
  const auto cs = j.contains("cos") ? number_array(j, "cos") : std::vector<double>{};
  const auto sn = j.contains("sin") ? number_array(j, "sin") : std::vector<double>{};
  std::vector<double> v(N, c0);
  for (int i = 0; i < N; ++i) {
    const double x = 2.0 * std::numbers::pi * i / N;
    for (std::size_t m = 0; m < cs.size(); ++m) v[i] += cs[m] * std::cos((m + 1.0) * x);
    for (std::size_t m = 0; m < sn.size(); ++m) v[i] += sn[m] * std::sin((m + 1.0) * x);
  }
  return v;
}

}  // namespace

void cmd_gowdy(const Context& c) {
  const auto& j = c.config;
  validate(j,
           {{"N", Kind::Integer, true},
            {"k", Kind::Object},
            {"omega", Kind::Object},
            {"k_values", Kind::NumberArray},
            {"omega_values", Kind::NumberArray},
            {"t_start", Kind::Number},
            {"t_end", Kind::Number, true},
            {"K_max", Kind::Number},
            {"tol", Kind::Number},
            {"fit_samples", Kind::Integer},
            {"fit_span", Kind::Number},
            kSeed,
            kOut},
           "gowdy config");
  const int N = j.at("N");
  if (N < 3 || N % 2 == 0) fail(ErrorKind::Config, "gowdy config: N must be odd and >= 3");
  auto profile = [&](const char* obj, const char* arr) {
    if (j.contains(obj) == j.contains(arr))
      fail(ErrorKind::Config, std::string("gowdy config: give exactly one of \"") + obj + "\" or \"" + arr + "\"");
    return gowdy_profile(j.contains(obj) ? j.at(obj) : j.at(arr), N, "gowdy config");
  };
  const auto k = profile("k", "k_values");
  const auto om = profile("omega", "omega_values");
  GowdyOptions o;
  o.K_max = number(j, "K_max", o.K_max);
  o.tol = positive(j, "tol", o.tol, "gowdy config");
  o.fit_samples = j.value("fit_samples", o.fit_samples);
  o.fit_span = positive(j, "fit_span", o.fit_span, "gowdy config");
  const auto r = gowdy_evolve_and_prescribe(k, om, positive(j, "t_start", 1e-3, "gowdy config"),
                                            positive(j, "t_end", 1.0, "gowdy config"), o);
  ensure_directory(c.out);
  CsvWriter csv(path(c, "gowdy.csv"), "x,k,omega,k_fit,omega_fit,P,Pt");
  for (int i = 0; i < N; ++i) {
    csv << 2.0 * std::numbers::pi * i / N << k[i] << om[i] << r.k_fit[i] << r.omega_fit[i] << r.P[i] << r.Pt[i];
    csv.end_row();
  }
  csv.close();
  ordered_json s;
  s["N"] = N;
  s["t_start"] = r.t_start;
  s["t_end"] = r.t_end;
  s["k_error"] = r.k_error;
  s["omega_error"] = r.omega_error;
  s["fit_condition"] = r.fit_condition;
  bool neg = false, pos = false;
  for (double v : k) (v < 0.0 ? neg : pos) = true;
  s["k_sign_indefinite"] = neg && pos;
  write_json(c, "gowdy.json", s);
}

}  // namespace cli
