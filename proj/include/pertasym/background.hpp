#pragma once

#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pertasym/eos.hpp"

namespace pertasym {

// Value of G for which 8 pi G / 3 = 1.
inline constexpr double kDefaultG = 3.0 / (8.0 * std::numbers::pi);

struct BackgroundState {
  double eta = 0.0;
  double a = 0.0;
  double H = 0.0;  // conformal Hubble rate a'/a
  double eps = 0.0;
  double m = 0.0;
  std::optional<double> tau;
};

enum class Regime { Underdamped, Critical, Overdamped };

struct RegimeClass {
  Regime regime = Regime::Underdamped;
  std::optional<double> sigma;
};

const char* to_string(Regime r);

struct TauLimit {
  double tau_inf = 0.0;          // fit over the last decade of eta
  double tau_inf_doubled = 0.0;  // fit over the last two decades
  double coefficient = 0.0;      // C in tau = tau_inf + C eta^{1 - 3 sigma}
  double relative_change() const;
};

// Sampled background solution on a uniform grid in u = ln eta with cubic
// Hermite interpolation between samples.
class BackgroundTrajectory {
 public:
  const EquationOfState& eos() const { return eos_; }
  double G() const { return G_; }
  // 8 pi G / 3
  double kappa() const;
  int interpolation_order() const { return 3; }
  double eta0() const { return eta0_; }
  double eta_min() const;
  double eta_max() const;

  const std::vector<BackgroundState>& samples() const { return samples_; }
  bool has_tau() const { return !tau_.empty(); }
  const std::optional<TauLimit>& tau_limit() const { return tau_limit_; }

  // Throws an interpolation error outside [eta_min, eta_max].
  BackgroundState at(double eta) const;
  // ln a, eta H, ln eps and their u-derivatives, interpolated.
  struct Raw {
    double lna, h, lneps, dlna, dh, dlneps;
  };
  Raw raw(double eta) const;

  // Relative Hamiltonian-constraint residual |H^2 - kappa a^2 eps| / H^2.
  double max_constraint_residual() const;

 private:
  friend BackgroundTrajectory solve_background(const EquationOfState&, double, double, double,
                                               std::pair<double, double>, double, double);
  friend BackgroundTrajectory tau_time(const BackgroundTrajectory&);

  std::size_t locate(double u, double& t) const;

  EquationOfState eos_ = EquationOfState::linear(0.0);
  double G_ = kDefaultG;
  double eta0_ = 1.0;
  double u_first_ = 0.0, du_ = 1.0;
  std::vector<double> lna_, h_, lneps_, lnm_, tau_;
  std::vector<double> dlna_, dh_, dlneps_, dlnm_, dtau_;
  std::vector<BackgroundState> samples_;
  std::optional<TauLimit> tau_limit_;
};

// Integrates the Friedmann and continuity equations through eta0 over
// eta_range. H(eta0) is the positive root of the constraint. Throws a
// singularity error (with the last valid eta) if a or eps degenerates.
BackgroundTrajectory solve_background(const EquationOfState& eos, double eta0, double a0,
                                      double eps0, std::pair<double, double> eta_range,
                                      double tol = 1e-10, double G = kDefaultG);

BackgroundState background_closed_form_linear(double w, double eta0, double a0, double eta,
                                              double G = kDefaultG);

// Conformal time elapsed since the big bang for a state with scale factor a0
// and density eps0, i.e. the eta0 that puts the singularity at eta = 0.
double singularity_conformal_time(const EquationOfState& eos, double a0, double eps0,
                                  double G = kDefaultG);

RegimeClass classify_regime(const EquationOfState& eos);

// Adds tau(eta) = int sqrt(f') d eta with tau(eta0) = 0 and, for overdamped
// backgrounds, the extrapolated limit tau_inf.
BackgroundTrajectory tau_time(const BackgroundTrajectory& traj);

void write_background_csv(const BackgroundTrajectory& traj, const std::string& path);

}  // namespace pertasym
