#pragma once

#include <array>
#include <complex>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pertasym/background.hpp"
#include "pertasym/spectral.hpp"

namespace pertasym {

struct PerturbationState {
  double eta = 1.0;
  SpectralField phi;
  SpectralField dphi;
};

// nu = (5 + 3w) / (2 (1 + 3w))
double nu_index(double w);

using ModeVec = std::array<double, 2>;

// (u', u'') for u'' = -(2 nu + 1) u' / eta - w k2 u. Throws for eta <= 0.
ModeVec mode_rhs_linear(double w, double k2, double eta, ModeVec u);

// (u', u'') for u'' = -3 (1 + f') H u' - 3 (f' - f/eps) H^2 u - f' k2 u with
// the background interpolated at eta.
ModeVec mode_rhs_general(const BackgroundTrajectory& bg, double k2, double eta, ModeVec u);

// Perturbation equation: either a linear equation of state with index w or a
// general one through a sampled background.
class WaveModel {
 public:
  static WaveModel linear(double w);
  static WaveModel general(std::shared_ptr<const BackgroundTrajectory> bg);

  bool is_linear() const { return bg_ == nullptr; }
  double w() const { return w_; }
  const BackgroundTrajectory* background() const { return bg_.get(); }

  ModeVec rhs(double k2, double eta, ModeVec u) const;
  // squared wave speed at eta: w, or f'(eps(eta))
  double wave_speed_sq(double eta) const;

 private:
  double w_ = 0.0;
  std::shared_ptr<const BackgroundTrajectory> bg_;
};

struct EvolveOptions {
  double tol = 1e-10;
};

// Fundamental matrix of one mode equation between two times:
// (u, u')(eta) = [[m00, m01], [m10, m11]] (u, u')(eta0).
struct Transfer {
  double m00 = 1.0, m01 = 0.0, m10 = 0.0, m11 = 1.0;
};

// Transfer matrices from eta0 to every entry of etas (any order, any side of
// eta0) for the mode equation with wave number squared k2.
std::vector<Transfer> mode_transfers(const WaveModel& model, double k2, double eta0,
                                     std::span<const double> etas, const EvolveOptions& opt);

PerturbationState evolve(const PerturbationState& state, const WaveModel& model, double eta_target,
                         const EvolveOptions& opt = {});

// States at each requested time, in the order given.
std::vector<PerturbationState> evolve_snapshots(const PerturbationState& state,
                                                const WaveModel& model,
                                                std::span<const double> etas,
                                                const EvolveOptions& opt = {});

// Time series of selected coefficients (indices into the cube).
struct ModeTracks {
  TorusGeometry geometry;
  std::vector<double> eta;
  std::vector<std::size_t> modes;
  std::vector<std::vector<std::complex<double>>> phi;   // [mode][time]
  std::vector<std::vector<std::complex<double>>> dphi;  // [mode][time]
};

ModeTracks track_modes(const PerturbationState& state, const WaveModel& model,
                       std::span<const double> etas, std::span<const std::size_t> modes,
                       const EvolveOptions& opt = {});

// Coefficient indices of the closed upper half cube (mean included) with a
// nonzero coefficient in phi or dphi.
std::vector<std::size_t> active_modes(const PerturbationState& state);

// -2 Phi - 2 Phi' / H + (2/3) H^-2 Lap Phi
SpectralField density_contrast(const PerturbationState& state, const BackgroundState& bg);
// (-3 H Phi' - 3 H^2 Phi + Lap Phi) / (4 pi G a^2)
SpectralField delta_epsilon(const PerturbationState& state, const BackgroundState& bg,
                            double G = kDefaultG);

struct EnergyE1 {
  double E1 = 0.0;
  double weighted = 0.0;  // eta^{2(2 nu + 1)} E1
};
EnergyE1 energy_E1(const PerturbationState& state, double w);

// Energy of psi = eta^{nu + 1/2} Phi. Throws a precondition error when the
// state has a nonzero mean.
double psi_energy_E3(const PerturbationState& state, double w);

// Writes one spectral field file per snapshot (phi and dphi) and a CSV
// eta,E1,weightedE1,E3,mean_phi into dir.
void write_snapshots(const std::vector<PerturbationState>& snaps, double w, const std::string& dir);

}  // namespace pertasym
