#pragma once

#include <array>
#include <span>
#include <vector>

namespace pertasym {

// Polarized Gowdy equation P_tt + P_t / t = P_xx on the circle [0, 2 pi).

// P and P_t of the formal solution (k log t + omega) + sum_{j >= 1} (a_j + b_j log t) t^{2j}
// of one Fourier mode with wave number squared n2, truncated at t^{K_max}.
std::array<double, 2> gowdy_series(double n2, double k, double omega, double t, double K_max);

struct GowdyOptions {
  double K_max = 8.0;
  double tol = 1e-11;
  int fit_samples = 40;
  double fit_span = 10.0;  // fit window [t_start, fit_span * t_start]
};

struct GowdyResult {
  int N = 0;
  double t_start = 0.0, t_end = 0.0;
  std::vector<double> P, Pt;              // grid values at t_end
  std::vector<double> k_fit, omega_fit;   // grid values fitted back near t_start
  double k_error = 0.0, omega_error = 0.0;  // max |fit - input| / max |input|
  double fit_condition = 0.0;
};

// Seeds the series at t_start, evolves every Fourier mode to t_end, evolves
// back to the fit window and fits {log t, 1, t^2 log t, t^2, t^4 log t, t^4}.
// k and omega are grid values on N equispaced points (N odd).
GowdyResult gowdy_evolve_and_prescribe(std::span<const double> k, std::span<const double> omega,
                                       double t_start, double t_end,
                                       const GowdyOptions& opt = {});

}  // namespace pertasym
