#include "wavecascade/modal.hpp"

#include <algorithm>
#include <string>

namespace wavecascade {

namespace {

ModalData make_mode(const PlantConfig& cfg, const MeasurementSpec& spec, ModeIndex idx,
                    const Quadrature& quad) {
  ModalData d;
  d.index = idx;
  d.pair = normalize_pair(eigen_pair(cfg, idx, quad), quad);
  d.lambda = d.pair.lambda;
  const ModalInputCoeffs ic = input_coeffs(cfg, d.pair, quad);
  d.a = ic.a;
  d.b = ic.b;
  d.c = measurement_coeffs(cfg, spec, d.pair, quad).c;
  return d;
}

}  // namespace

ModalCatalog::ModalCatalog(const PlantConfig& cfg, const MeasurementSpec& spec, int n_max,
                           int m_max)
    : cfg_(cfg), spec_(spec), n_max_(n_max), m_max_(m_max),
      quad_(default_quadrature(cfg, std::max({n_max, m_max, 1}))) {
  if (n_max < 1 || m_max < 0) throw ConfigError("modal catalog needs n_max >= 1 and m_max >= 0");
  require_valid(cfg_);
  spec_.validate(cfg_);
  par_.reserve(n_max);
  for (int n = 1; n <= n_max; ++n) {
    par_.push_back(make_mode(cfg_, spec_, ModeIndex::parabolic(n), quad_));
    gamma_.push_back(wavecascade::gamma(cfg_, n));
  }
  hyp_.reserve(2 * m_max + 1);
  for (int m = -m_max; m <= m_max; ++m) {
    hyp_.push_back(make_mode(cfg_, spec_, ModeIndex::hyperbolic(m), quad_));
  }
}

const ModalData& ModalCatalog::parabolic(int n) const {
  if (n < 1 || n > n_max_) throw ConfigError("parabolic mode " + std::to_string(n) + " not in catalog");
  return par_[n - 1];
}

const ModalData& ModalCatalog::hyperbolic(int m) const {
  if (m < -m_max_ || m > m_max_) {
    throw ConfigError("hyperbolic mode " + std::to_string(m) + " not in catalog");
  }
  return hyp_[m + m_max_];
}

const ModalData& ModalCatalog::mode(ModeIndex idx) const {
  return idx.is_parabolic() ? parabolic(idx.k) : hyperbolic(idx.k);
}

const GammaCoefficient& ModalCatalog::gamma(int n) const {
  if (n < 1 || n > n_max_) throw ConfigError("gamma_" + std::to_string(n) + " not in catalog");
  return gamma_[n - 1];
}

}  // namespace wavecascade
