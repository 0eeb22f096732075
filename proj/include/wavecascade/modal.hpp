#pragma once

#include <map>
#include <vector>

#include "wavecascade/coupling.hpp"
#include "wavecascade/plant.hpp"
#include "wavecascade/spectral.hpp"

namespace wavecascade {

/// Everything the reduced models and the simulator need about one mode.
struct ModalData {
  ModeIndex index;
  cplx lambda;
  cplx a, b;  // input coefficients
  cplx c;     // measurement coefficient, unscaled
  EigenPair pair;  // normalized so that ⟨φ, ψ⟩ = 1
};

/// Modes n = 1..n_max and m = −m_max..m_max, computed once and shared by every
/// (N, M) the synthesis search visits and by the simulator.
class ModalCatalog {
 public:
  ModalCatalog(const PlantConfig& cfg, const MeasurementSpec& spec, int n_max, int m_max);

  const PlantConfig& config() const { return cfg_; }
  const MeasurementSpec& measurement() const { return spec_; }
  int n_max() const { return n_max_; }
  int m_max() const { return m_max_; }
  const Quadrature& quadrature() const { return quad_; }

  const ModalData& parabolic(int n) const;
  const ModalData& hyperbolic(int m) const;
  const ModalData& mode(ModeIndex idx) const;

  /// γₙ with its cancellation-free magnitude, n ≤ n_max.
  const GammaCoefficient& gamma(int n) const;

 private:
  PlantConfig cfg_;
  MeasurementSpec spec_;
  int n_max_, m_max_;
  Quadrature quad_;
  std::vector<ModalData> par_;  // index n − 1
  std::vector<ModalData> hyp_;  // index m + m_max
  std::vector<GammaCoefficient> gamma_;
};

}  // namespace wavecascade
