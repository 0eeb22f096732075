#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "wavecascade/errors.hpp"
#include "wavecascade/plant.hpp"
#include "wavecascade/spectral.hpp"

namespace wavecascade {

class DivergingTailError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct GammaCoefficient {
  enum class Branch { Generic, ZeroEigenvalue };
  int n = 1;
  Branch branch = Branch::Generic;
  // value = scaled·exp(log_scale). value is ±inf when |λ₁,ₙ|·L is too large to
  // represent it; every comparison inside the library uses `scaled`.
  double scaled = 0.0;
  double log_scale = 0.0;
  double value = 0.0;
  /// ∫ |β(s) sin(nπs/L)|·|w(s)| ds with the same weight and scaling: the size a
  /// cancellation-free γ would have, used for relative zero tests.
  double magnitude = 0.0;
};

GammaCoefficient gamma(const PlantConfig& cfg, int n, const Quadrature& quad);
/// Uses a quadrature sized for mode n.
GammaCoefficient gamma(const PlantConfig& cfg, int n);

/// Closed form for an indicator β, both branches. A zero-width support gives 0.
GammaCoefficient gamma_closed_form_indicator(const PlantConfig& cfg, int n);

struct GammaRoot {
  double b = 0.0;
  double gamma = 0.0;
  bool converged = false;  // |γ| < 1e−10, or the bracket collapsed to adjacent doubles
  // The bracket collapsed first: |γ| is then bounded by |∂γ/∂b|·ulp(b), which
  // exceeds 1e−10 once γ's exponential scale is large.
  bool resolution_limited = false;
};

struct GammaScan {
  int n = 1;
  std::vector<double> b;
  std::vector<double> gamma;  // raw values
  std::vector<GammaRoot> roots;
};

/// Samples γₙ over b with a, β₀ fixed, then bisects every sign change.
/// Samples with b ≤ a are skipped.
GammaScan gamma_scan(const PlantConfig& cfg, int n, double b_lo, double b_hi, int samples);

/// Columns b, gamma, is_root; roots are emitted as extra rows in b order.
void write_gamma_scan_csv(std::ostream& os, const GammaScan& scan);

struct ModalInputCoeffs {
  ModeIndex index;
  cplx a, b;
  cplx beta_coeff;  // a + λ·b
  cplx psi3_L_conj; // cross-check value conj(ψ³(L))
};

ModalInputCoeffs input_coeffs(const PlantConfig& cfg, const EigenPair& pair,
                              const Quadrature& quad);

struct MeasurementSpec {
  enum class Kind { Distributed, Dirichlet, Neumann };
  Kind kind = Kind::Dirichlet;
  std::function<double(double)> weight;  // distributed only
  std::string weight_text;               // for reports
  double xi = 0.0;                       // pointwise only

  static MeasurementSpec distributed(std::function<double(double)> w, std::string text = {});
  static MeasurementSpec dirichlet(double xi);
  static MeasurementSpec neumann(double xi);

  /// Index scaling exponent of the parabolic tail: 0, 1, 7/4.
  double kappa() const;
  std::string describe() const;
  void validate(const PlantConfig& cfg) const;
};

struct MeasurementCoeffs {
  ModeIndex index;
  cplx c;
};

MeasurementCoeffs measurement_coeffs(const PlantConfig& cfg, const MeasurementSpec& spec,
                                     const EigenPair& pair, const Quadrature& quad);

struct TailSums {
  int N = 0, M = 0, cutoff = 0;
  // Partial sums over N+1..cutoff (|m| in M+1..cutoff) plus the remainders.
  double S_a = 0, S_b = 0, S_c1 = 0, S_c2 = 0;
  double partial_a = 0, partial_b = 0, partial_c1 = 0, partial_c2 = 0;
  double rem_a = 0, rem_b = 0, rem_c1 = 0, rem_c2 = 0;
  bool flagged = false;
  std::vector<std::string> flags;
};

inline constexpr int kDefaultTailCutoff = 512;

struct TailRemainder {
  double value = 0.0;
  bool flagged = false;
  std::string note;
};

/// Remainder beyond the last index of terms[1..K] (slot 0 unused): fits
/// the exponent p of |term| ≈ C·k^p on geometric bin means over the last decade,
/// matches C to the mass of the last 32 terms and integrates the law from
/// K + 1/2. Throws DivergingTailError for p ≥ 0; p ≥ −1 gives +inf, flagged.
TailRemainder tail_remainder(const std::vector<double>& terms, const std::string& name);

/// Per-index tail terms up to a cutoff, computed once; suffix sums answer any
/// (N, M). Hyperbolic entries combine ±m.
class TailTable {
 public:
  TailTable(const PlantConfig& cfg, const MeasurementSpec& spec, int cutoff = kDefaultTailCutoff);

  int cutoff() const { return cutoff_; }
  TailSums sums(int N, int M) const;

  // Terms indexed by n (parabolic, 1..cutoff) or |m| (hyperbolic, 1..cutoff); slot 0 unused.
  const std::vector<double>& parabolic_a() const { return pa_; }
  const std::vector<double>& parabolic_b() const { return pb_; }
  const std::vector<double>& parabolic_c() const { return pc_; }
  const std::vector<double>& hyperbolic_a() const { return ha_; }
  const std::vector<double>& hyperbolic_b() const { return hb_; }
  const std::vector<double>& hyperbolic_c() const { return hc_; }

 private:
  int cutoff_;
  std::vector<double> pa_, pb_, pc_, ha_, hb_, hc_;
  std::vector<double> spa_, spb_, spc_, sha_, shb_, shc_;  // suffix sums
  TailRemainder ra_p_, rb_p_, rc_p_, ra_h_, rb_h_, rc_h_;
};

TailSums tail_sums(const PlantConfig& cfg, const MeasurementSpec& spec, int N, int M,
                   int cutoff = kDefaultTailCutoff);

/// Closed forms for hyperbolic input coefficients (ψ normalization as stated).
cplx hyperbolic_a_closed(const PlantConfig& cfg, int m);
cplx hyperbolic_b_closed(const PlantConfig& cfg, int m);

}  // namespace wavecascade
