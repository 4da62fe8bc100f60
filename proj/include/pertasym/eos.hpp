#pragma once

#include <string>
#include <variant>
#include <vector>

namespace pertasym {

struct LinearEos {
  double w = 0.0;
};

struct PowerLawTerm {
  double f = 0.0;  // coefficient
  double a = 1.0;  // exponent
};

// Which end of the density range a power-law expansion describes.
enum class ExpansionSide { HighDensity, LowDensity };

// f(eps) = w eps + sum_j f_j eps^{a_j}
struct PowerLawEos {
  double w = 0.0;
  std::vector<PowerLawTerm> terms;
  ExpansionSide side = ExpansionSide::LowDensity;
};

// eps = m + K n m^{(n+1)/n}, p = K m^{(n+1)/n}
struct PolytropicEos {
  double K = 0.1;
  double n = 2.0;
};

class EquationOfState {
 public:
  using Variant = std::variant<LinearEos, PowerLawEos, PolytropicEos>;

  static EquationOfState linear(double w);
  // Exponents all < 1 and strictly decreasing give a high-density expansion,
  // all > 1 and strictly increasing a low-density one.
  static EquationOfState power_law(double w, std::vector<PowerLawTerm> terms);
  static EquationOfState polytropic(double K, double n);

  const Variant& variant() const { return v_; }
  bool is_dust() const;
  // lim f(eps)/eps at the end of the density range the model describes
  // (high density for polytropic and high-density power laws).
  double limiting_w() const;
  std::string describe() const;

 private:
  explicit EquationOfState(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

struct EosDerivatives {
  double f = 0.0;
  double fp = 0.0;
  double fpp = 0.0;
  double fppp = 0.0;
};

// Throws a domain error for eps < 0 and a numeric error if the polytropic
// inversion fails.
double eos_pressure(const EquationOfState& eos, double eps);
EosDerivatives eos_derivatives(const EquationOfState& eos, double eps);
// Throws a physicality error unless f'(eps) is in [0, 1].
double eos_sound_speed_sq(const EquationOfState& eos, double eps);

// Polytropic parameter m for a given energy density.
double polytropic_parameter(const PolytropicEos& p, double eps);

// m(eps) = exp(int_1^eps dxi / (xi + f(xi))), by adaptive quadrature.
double mass_density(const EquationOfState& eos, double eps);

// Y = f' - f/eps, Z = 1 + f' - (eps + f) f'' / (2 f')
struct TauCoefficients {
  double Y = 0.0;
  double Z = 0.0;
};
TauCoefficients tau_coefficients(const EquationOfState& eos, double eps);

}  // namespace pertasym
