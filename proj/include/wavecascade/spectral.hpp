#pragma once

#include <Eigen/Dense>
#include <concepts>
#include <memory>
#include <vector>

#include "wavecascade/plant.hpp"
#include "wavecascade/quadrature.hpp"

namespace wavecascade {

/// Value of a state triple (f1, f2, f3) at one point, with the derivatives the
/// 𝓗⁰/𝓗¹ inner products and the Neumann measurement need.
struct FieldValue {
  cplx f1{}, f1_x{}, f2{}, f2_x{}, f3{};
};

FieldValue operator*(cplx s, const FieldValue& v);

class ModeField {
 public:
  virtual ~ModeField() = default;
  virtual FieldValue at(double x) const = 0;
  /// Values at ascending points. Green-type fields override this with a sweep.
  virtual std::vector<FieldValue> at_sorted(const std::vector<double>& xs) const;
};

struct SpectralOptions {
  /// Fault injection for the verification suite: multiplies A_m inside φ₂,ₘ only.
  double phi_am_scale = 1.0;
};

struct EigenPair {
  ModeIndex index;
  cplx lambda;
  cplx r;            // hyperbolic: principal √(λ − c)
  double A_m = 0.0;  // hyperbolic normalization
  double mu = 0.0;   // −ρ

  // Parabolic coupling coefficient, stored as gamma_scaled·exp(gamma_log_scale)
  // because the raw value overflows once |λ₁,ₙ|·L exceeds ~700.
  double gamma_scaled = 0.0;
  double gamma_log_scale = 0.0;
  bool zero_branch = false;

  cplx psi_factor = 1.0;      // cumulative rescaling of ψ
  cplx normalization = 1.0;   // factor applied by the last normalize_pair

  std::shared_ptr<const ModeField> phi_field;
  std::shared_ptr<const ModeField> psi_field;

  bool has_phi() const { return static_cast<bool>(phi_field); }
  bool has_psi() const { return static_cast<bool>(psi_field); }
  FieldValue phi(double x) const;
  FieldValue psi(double x) const;
  std::vector<FieldValue> phi_at(const std::vector<double>& xs) const;
  std::vector<FieldValue> psi_at(const std::vector<double>& xs) const;
  /// Raw γₙ; ±inf when not representable.
  double gamma() const;
};

/// Composite rule sized for modes up to the given index, split at β's breakpoints.
Quadrature default_quadrature(const PlantConfig& cfg, int highest_index, int order = 32);

cplx eigenvalue(const PlantConfig& cfg, ModeIndex idx);

EigenPair eigenvector(const PlantConfig& cfg, ModeIndex idx, const Quadrature& quad,
                      const SpectralOptions& opts = {});
EigenPair dual_eigenvector(const PlantConfig& cfg, ModeIndex idx, const Quadrature& quad);
/// Both φ and ψ.
EigenPair eigen_pair(const PlantConfig& cfg, ModeIndex idx, const Quadrature& quad,
                     const SpectralOptions& opts = {});

/// ∫ (u¹ conj v¹ + (u²)' conj (v²)' + u³ conj v³) with values at quad.nodes().
cplx inner_product_H0(const std::vector<FieldValue>& u, const std::vector<FieldValue>& v,
                      const Quadrature& quad);

template <class U, class V>
  requires std::invocable<U&, double> && std::invocable<V&, double>
cplx inner_product_H0(U&& u, V&& v, const Quadrature& quad) {
  return quad.integrate([&](double x) {
    const FieldValue a = u(x), b = v(x);
    return a.f1 * std::conj(b.f1) + a.f2_x * std::conj(b.f2_x) + a.f3 * std::conj(b.f3);
  });
}

inline constexpr double kTolBiorth = 1e-10;

/// Rescales ψ so that ⟨φ, ψ⟩ = 1; the applied factor lands in `normalization`.
EigenPair normalize_pair(const EigenPair& pair, const Quadrature& quad,
                         double tol_biorth = kTolBiorth);

struct BiorthogonalityReport {
  std::vector<ModeIndex> modes;  // parabolic 1..n_max, then hyperbolic_order(m_max)
  // gram(i, j) = ⟨φᵢ, ψⱼ⟩ of the pairs as constructed, so the diagonal tests the
  // stated normalization constants; normalize_pair would rescale by factors[i].
  Eigen::MatrixXcd gram;
  std::vector<cplx> factors;
  double max_offdiag = 0.0;
  double max_diag_dev = 0.0;
  double max_factor_dev = 0.0;   // max |factor − 1|
};

BiorthogonalityReport biorthogonality_matrix(const PlantConfig& cfg, int n_max, int m_max,
                                             const Quadrature& quad,
                                             const SpectralOptions& opts = {});

}  // namespace wavecascade
