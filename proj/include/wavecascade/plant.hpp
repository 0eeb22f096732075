#pragma once

#include <string>
#include <vector>

namespace wavecascade {

/// Real coupling profile β on [0, L].
class BetaProfile {
 public:
  enum class Kind { Constant, Indicator, Polynomial, Tabulated };

  static BetaProfile constant(double beta0);
  /// β0 on [a, b], zero elsewhere.
  static BetaProfile indicator(double beta0, double a, double b);
  /// Σ coeffs[k]·x^k.
  static BetaProfile polynomial(std::vector<double> coeffs);
  /// Piecewise-linear interpolation of (xs, values); xs strictly increasing.
  static BetaProfile tabulated(std::vector<double> xs, std::vector<double> values);
  /// Values on the uniform grid of [0, L].
  static BetaProfile tabulated_uniform(double L, std::vector<double> values);

  Kind kind() const { return kind_; }
  double operator()(double x) const;

  /// Interior points where β or β' jumps; quadrature panels are split there.
  std::vector<double> breakpoints() const;

  bool is_zero() const;
  /// A copy multiplied by s.
  BetaProfile scaled(double s) const;

  double beta0() const { return beta0_; }
  double a() const { return a_; }
  double b() const { return b_; }
  const std::vector<double>& coefficients() const { return coeffs_; }
  const std::vector<double>& grid() const { return xs_; }
  const std::vector<double>& values() const { return values_; }

  std::string describe() const;

 private:
  Kind kind_ = Kind::Constant;
  double beta0_ = 0.0, a_ = 0.0, b_ = 0.0;
  std::vector<double> coeffs_, xs_, values_;
};

struct PlantConfig {
  double L = 1.0;
  double c = 0.0;
  BetaProfile beta = BetaProfile::constant(0.0);
  double alpha = 2.0;
  double delta = 1.0;

  /// ρ = (1/2L)·log((α−1)/(α+1)), the real part of every hyperbolic eigenvalue.
  double rho() const;
  double mu() const { return -rho(); }
  /// Threshold below which λ₁,ₙ is treated as exactly zero.
  double tol_zero() const;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
  /// Parabolic indices n with c ≈ ρ + n²π²/L².
  std::vector<int> alpha_condition_failures;
  bool rho_violation = false;
};

double default_tol_alpha(const PlantConfig& cfg);

/// Checks the plant invariants. Throws ConfigError for α ≤ 1, which is outside
/// the supported model rather than a soft violation.
ValidationReport validate_config(const PlantConfig& cfg, double tol_alpha);
ValidationReport validate_config(const PlantConfig& cfg);

/// Throws ConfigError listing every violation.
void require_valid(const PlantConfig& cfg);

struct ModeIndex {
  enum class Family { Parabolic, Hyperbolic };
  Family family = Family::Parabolic;
  int k = 1;

  static ModeIndex parabolic(int n);
  static ModeIndex hyperbolic(int m);
  bool is_parabolic() const { return family == Family::Parabolic; }
  bool is_hyperbolic() const { return family == Family::Hyperbolic; }
  std::string label() const;

  friend bool operator==(const ModeIndex&, const ModeIndex&) = default;
};

/// Hyperbolic indices in the fixed order 0, −1, +1, −2, +2, …, −M, +M.
std::vector<int> hyperbolic_order(int M);

}  // namespace wavecascade
