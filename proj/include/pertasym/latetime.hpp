#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pertasym/background.hpp"
#include "pertasym/evolver.hpp"
#include "pertasym/spectral.hpp"

namespace pertasym {

// psi = eta^{nu + 1/2} Phi for a zero-mean state.
struct PsiState {
  double eta = 1.0;
  SpectralField psi;
  SpectralField dpsi;
};

// Throws a precondition error when phi or dphi has a nonzero mean.
PsiState psi_transform(const PerturbationState& state, double w);
PerturbationState psi_inverse(const PsiState& state, double w);

struct PolarPoint {
  double r = 0.0;
  double theta = 0.0;
};

// r = sqrt(psi^2 + (psi'/omega)^2), theta = atan2(psi'/omega, psi) with
// omega = sqrt(w) |k|. Throws unsupported for w = 0 and a domain error for k = 0.
PolarPoint mode_polar(double psi, double dpsi, double k_abs, double w);

struct ModePolarTrack {
  std::array<int, 3> k{};
  std::vector<double> time, r, theta;  // theta unwrapped
};

// Polar form of one real track with angular frequency omega. Throws a
// precondition error if the sampling step exceeds pi / (2 omega).
ModePolarTrack polar_track(std::array<int, 3> k, std::span<const double> time,
                           std::span<const double> psi, std::span<const double> dpsi,
                           double omega);

struct HomogeneousFit {
  double A = 0.0;
  double B = 0.0;
  double condition = 0.0;
  bool degenerate = false;
  std::vector<std::string> warnings;
};

// Least squares of the mean of Phi in {1, eta^{-2 nu}}. A degenerate basis
// (eta^{-2 nu} negligible on the window) gives B = 0 and a warning.
HomogeneousFit fit_homogeneous(std::span<const double> eta, std::span<const double> mean, double w);

enum class TimeVariable { Eta, Tau };
const char* to_string(TimeVariable t);

// One real amplitude: key k (upper half) is the cos(k.x) part, key -k the
// sin(k.x) part, each ~ Wbar cos(omega (t - tbar)).
struct ProfileMode {
  std::array<int, 3> k{};
  double Wbar = 0.0;
  double etabar = 0.0;     // in [0, 2 pi / omega)
  double residual = 0.0;   // max of relative r misfit and theta misfit
  double slope = 0.0;      // fitted d theta / dt
  double drift = 0.0;      // max |r / Wbar - 1| * t over the window
};

struct WaveProfile {
  TorusGeometry geometry;
  TimeVariable time_variable = TimeVariable::Eta;
  double A = 0.0;
  double B = 0.0;
  std::vector<ProfileMode> modes;
  double max_residual = 0.0;
  std::vector<std::string> warnings;

  const ProfileMode* find(std::array<int, 3> k) const;
};

struct ExtractOptions {
  double residual_threshold = 1e-3;
  std::size_t min_samples = 200;
};

// Uniform samples on [eta_max / 10, eta_max], at least n of them and fine
// enough for the largest frequency.
std::vector<double> late_window(double eta_max, double omega_max, std::size_t n = 200);

// Fits every tracked mode of a linear-EoS solution sampled on a late window.
// Throws inconclusive ("window too early") when a fit residual exceeds the
// threshold.
WaveProfile extract_wave_profile(const ModeTracks& tracks, double w, const ExtractOptions& opt = {});

// A + eta^{-nu-1/2} W + B eta^{-2 nu} and its eta-derivative. With
// corrections, each mode is the exact solution with the given asymptotic
// profile, summed from its Hankel expansion.
PerturbationState asymptotic_state(const WaveProfile& profile, double w, double eta,
                                   bool corrections = true);

struct ReconstructLateOptions {
  bool seed_corrections = true;
  double tol = 1e-11;
};

PerturbationState reconstruct_from_wave_profile(const WaveProfile& profile, double w,
                                                double eta_far, double eta_target,
                                                const ReconstructLateOptions& opt = {});

// Amplitude norm sqrt(sum |Phi_k|^2 + |Phi_k'|^2 / (w k^2)) over nonzero modes.
double zero_mean_amplitude(const PerturbationState& state, double w);

struct OmegaSample {
  double eta = 0.0;
  double tau = 0.0;
  double a = 0.0;
  double Htilde = 0.0;  // a^{-1} a_tau
  double Z = 0.0;
  double Omega = 0.0;
};

// ln Omega = -(3/2) int Z d ln a from eta0, at every trajectory sample.
// Throws unsupported for an overdamped equation of state.
std::vector<OmegaSample> omega_damping(const BackgroundTrajectory& traj);

// ln Omega at one time (Omega(eta0) = 1).
double log_omega(const BackgroundTrajectory& traj, double eta);

struct TauDynamics {
  double Htilde = 0.0;
  double Htilde_tau = 0.0;
  double Z = 0.0;
  double Z_tau = 0.0;
  double Y = 0.0;
  double A = 0.0;  // Psi_tt = A Htilde^2 Psi + Lap Psi
};

TauDynamics tau_dynamics(const BackgroundTrajectory& traj, double eta);

struct FrozenProfile {
  SpectralField phi0;
  SpectralField quad_coeff;
  double sigma = 0.0;
  double tau_inf = 0.0;
  double tau_inf_rel_change = 0.0;
  double quad_rel_err = 0.0;      // against ((sigma - 1/3)/(4 - 2 sigma)) Lap Phi0
  double measured_ratio = 0.0;    // <q, Lap Phi0> / |Lap Phi0|^2
  double derived_ratio = 0.0;     // (3 sigma - 1) / (12 sigma - 14)
  double derived_rel_err = 0.0;   // against derived_ratio Lap Phi0
  double limit_change = 0.0;      // Richardson limit shift when dropping the last snapshot
  double s_min = 0.0, s_max = 0.0;
};

struct CriticalReport {
  double tau_log_slope = 0.0;  // d tau / d ln eta over the final decade of eta
  double htilde_min = 0.0, htilde_max = 0.0;
  double htilde_variation = 0.0;  // (max - min) / max over the final decade of tau
  double tau_start = 0.0, tau_end = 0.0;
};

using LateTimeResult = std::variant<WaveProfile, FrozenProfile, CriticalReport>;

struct GeneralExtractOptions {
  ExtractOptions extract;
  double limit_tol = 1e-6;
};

// Dispatches on the regime of traj's equation of state. Underdamped: profile
// of Psi = Phi / Omega in tau with unit wave speed. Overdamped: frozen limit
// and s^2 coefficient, s = tau_inf - tau. Critical: tau growth and Htilde.
LateTimeResult general_latetime_extract(const ModeTracks& tracks, const BackgroundTrajectory& traj,
                                        const GeneralExtractOptions& opt = {});

// CSV kx,ky,kz,Wbar,etabar,residual.
void write_wave_profile_csv(const WaveProfile& profile, const std::string& path);
// Reads the CSV above (eta-time, A = B = 0). Throws an I/O error on malformed rows.
WaveProfile read_wave_profile_csv(const std::string& path, const TorusGeometry& g);
// phi0.json, quad_coeff.json and frozen.json {sigma, tau_inf, quad_rel_err, ...} in dir.
void write_frozen_profile(const FrozenProfile& fp, const std::string& dir);

}  // namespace pertasym
