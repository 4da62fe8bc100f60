#pragma once

#include <span>
#include <string>
#include <vector>

#include "pertasym/background.hpp"
#include "pertasym/evolver.hpp"
#include "pertasym/spectral.hpp"

namespace pertasym {

// Leading coefficients of a solution near eta = 0: psi1 multiplies
// eta^{-2 nu}, psi2 is the bounded part.
struct SingularityData {
  SpectralField psi1;
  SpectralField psi2;
};

struct SeriesTerm {
  double k = 0.0;
  int l = 0;  // 1 for the log eta term
  SpectralField coeff;
};

// Formal expansion sum_k (Phi_{k,0} + Phi_{k,1} log eta) eta^k truncated at
// k <= K_max. Terms are sorted by (k, l).
struct SeriesExpansion {
  double w = 0.0;
  double nu = 0.0;
  double K_max = 0.0;
  bool resonant = false;  // nu integer: the two exponent lattices merge
  std::vector<SeriesTerm> terms;
  std::vector<std::string> warnings;

  // nullptr when the term is not stored
  const SeriesTerm* find(double k, int l) const;
  // smallest lattice exponent above K_max
  double first_omitted() const;
};

// Resonance tests on nu: integer within 1e-9, near-resonant within 1e-3.
bool nu_is_integer(double nu);
bool nu_near_resonant(double nu);

SeriesExpansion build_series(double w, const SingularityData& data, double K_max);

struct SeriesValue {
  SpectralField phi;
  SpectralField dphi;
  std::vector<std::string> warnings;
};

// Evaluates the truncated series and its exact eta-derivative. Warns (does
// not throw) for eta >= 1.
SeriesValue evaluate_series(const SeriesExpansion& series, double eta);

struct ReconstructOptions {
  double eta_start = 1e-3;
  double K_max = 8.0;
  double tol = 1e-10;
};

// Solution with the given singularity data, at every requested time (any
// order, each >= eta_start). Below eta = 0.1 the state is the truncated
// series plus an integrated remainder; later times are reached by evolving.
std::vector<PerturbationState> reconstruct_samples(double w, const SingularityData& data,
                                                   std::span<const double> etas,
                                                   const ReconstructOptions& opt = {});

PerturbationState reconstruct_from_singularity_data(double w, const SingularityData& data,
                                                    double eta_end,
                                                    const ReconstructOptions& opt = {});

struct FitOptions {
  double K_fit = 4.0;
  double max_condition = 1e12;
};

struct FitTerm {
  double k = 0.0;
  int l = 0;
  SpectralField coeff;
};

struct SingularityFit {
  SingularityData data;
  std::vector<FitTerm> terms;  // every basis coefficient, data included
  double condition = 0.0;      // of the equilibrated weighted basis
  // weighted rms residual per coefficient of the closed upper half cube,
  // relative to the weighted rms of the samples
  std::vector<std::size_t> modes;
  std::vector<double> residual;
  double max_residual = 0.0;

  const FitTerm* find(double k, int l) const;
};

// 40 geometric samples on [1e-3, 5e-2].
std::vector<double> default_fit_window();

// Exponents (k, l) of the fit basis for index w.
std::vector<std::pair<double, int>> fit_basis(double w, double K_fit);

// Weighted least squares per coefficient against fit_basis(w). Samples must
// lie in (0, 0.1].
SingularityFit fit_asymptotic_data(std::span<const PerturbationState> samples, double w,
                                   const FitOptions& opt = {});

struct GeneralSingularityFit {
  double w_limit = 0.0;
  double expected_exponent = 0.0;  // -2 nu(w_limit)
  double measured_exponent = 0.0;  // slope of log ||Phi|| over the smallest decade
  SingularityData data;
  double max_residual = 0.0;
};

// Leading behaviour of a solution of the general equation near the
// singularity. For a linear equation of state this is fit_asymptotic_data.
GeneralSingularityFit fit_singularity_general(const EquationOfState& eos,
                                              std::span<const PerturbationState> samples,
                                              const FitOptions& opt = {});

// series.json ({w, nu, K_max, resonant, terms: [{k, l, file}]}) plus one field
// file per term in dir.
void write_series(const SeriesExpansion& series, const std::string& dir);

// JSON report of a fit: basis, condition, per-mode residuals.
std::string fit_report_json(const SingularityFit& fit, double w);

}  // namespace pertasym
