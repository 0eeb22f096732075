#include "wavecascade/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "wavecascade/errors.hpp"

namespace wavecascade {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr cplx kI(0.0, 1.0);

int local_order(const Quadrature& quad) { return std::min(quad.order(), 16); }

// Below this |r| the hyperbolic φ¹ Green function switches to the r = 0 kernel.
constexpr double kSmallR = 1e-8;

class ParabolicPhi final : public ModeField {
 public:
  ParabolicPhi(double kappa, double k) : kappa_(kappa), k_(k) {}
  FieldValue at(double x) const override {
    FieldValue v;
    v.f1 = kappa_ * std::sin(k_ * x);
    v.f1_x = kappa_ * k_ * std::cos(k_ * x);
    return v;
  }

 private:
  double kappa_, k_;
};

class HyperbolicPsi final : public ModeField {
 public:
  HyperbolicPsi(cplx lambda, double A, double L) : lb_(std::conj(lambda)), c_(A / L) {}
  FieldValue at(double x) const override {
    FieldValue v;
    const cplx sh = std::sinh(lb_ * x);
    v.f2 = c_ / (lb_ * lb_) * sh;
    v.f2_x = c_ / lb_ * std::cosh(lb_ * x);
    v.f3 = -c_ / lb_ * sh;
    return v;
  }

 private:
  cplx lb_;
  double c_;
};

// φ₂,ₘ. The coupled component solves (φ¹)'' − r²φ¹ = −βφ² with Dirichlet ends.
// Writing the Green function with exp(±r·) factored out leaves decaying kernels
// only, so large |m| neither overflows nor cancels.
class HyperbolicPhi final : public ModeField {
 public:
  HyperbolicPhi(const PlantConfig& cfg, cplx lambda, cplx r, double A, const Quadrature& quad)
      : L_(cfg.L), lambda_(lambda), r_(r), A_(A), small_(std::abs(r) < kSmallR),
        beta_is_zero_(cfg.beta.is_zero()) {
    nu_ = small_ ? 0.0 : r.real();
    omega_ = small_ ? 0.0 : r.imag();
    Q_ = 1.0 - std::exp(-2.0 * r * L_);
    if (beta_is_zero_) return;
    const BetaProfile beta = cfg.beta;
    const double L = L_, nu = nu_;
    const cplx lam = lambda, rr = r;
    DecayingCumulative::Fn g1, g2;
    if (small_) {
      g1 = [beta, lam](double s) { return beta(s) * std::sinh(lam * s) * s; };
      g2 = [beta, lam, L](double s) { return beta(s) * std::sinh(lam * s) * (L - s); };
    } else {
      // sinh(r s)·e^{−ν s} and sinh(r (L − s))·e^{−ν (L − s)}.
      g1 = [beta, lam, rr, nu](double s) {
        return beta(s) * std::sinh(lam * s) * 0.5 *
               (std::exp((rr - nu) * s) - std::exp(-(rr + nu) * s));
      };
      g2 = [beta, lam, rr, nu, L](double s) {
        const double t = L - s;
        return beta(s) * std::sinh(lam * s) * 0.5 *
               (std::exp((rr - nu) * t) - std::exp(-(rr + nu) * t));
      };
    }
    cum_ = std::make_shared<DecayingCumulative>(std::move(g1), std::move(g2), nu_, quad.edges(),
                                                local_order(quad));
  }

  FieldValue at(double x) const override {
    FieldValue v = base(x);
    if (cum_) couple(x, cum_->J1(x), cum_->J2(x), v);
    return v;
  }

  std::vector<FieldValue> at_sorted(const std::vector<double>& xs) const override {
    std::vector<FieldValue> out(xs.size());
    std::vector<cplx> j1, j2;
    if (cum_) cum_->sweep(xs, j1, j2);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out[i] = base(xs[i]);
      if (cum_) couple(xs[i], j1[i], j2[i], out[i]);
    }
    return out;
  }

 private:
  FieldValue base(double x) const {
    FieldValue v;
    const cplx sh = std::sinh(lambda_ * x);
    v.f2 = sh / A_;
    v.f2_x = lambda_ * std::cosh(lambda_ * x) / A_;
    v.f3 = lambda_ * sh / A_;
    return v;
  }

  void couple(double x, cplx J1, cplx J2, FieldValue& v) const {
    if (small_) {
      v.f1 = ((L_ - x) * J1 + x * J2) / (A_ * L_);
      v.f1_x = (-J1 + J2) / (A_ * L_);
      return;
    }
    const cplx e1 = std::exp(-2.0 * r_ * (L_ - x));
    const cplx e2 = std::exp(-2.0 * r_ * x);
    const cplx p1 = std::exp(-kI * omega_ * x) / Q_;
    const cplx p2 = std::exp(kI * omega_ * (x - L_)) / Q_;
    v.f1 = (p1 * (1.0 - e1) * J1 + p2 * (1.0 - e2) * J2) / (A_ * r_);
    v.f1_x = (-p1 * (1.0 + e1) * J1 + p2 * (1.0 + e2) * J2) / A_;
  }

  double L_;
  cplx lambda_, r_;
  double A_;
  bool small_, beta_is_zero_;
  double nu_ = 0.0, omega_ = 0.0;
  cplx Q_;
  std::shared_ptr<DecayingCumulative> cum_;
};

// ψ₁,ₙ. With h = ψ³ the adjoint system reduces to h'' − λ²h = −κβσ,
// h(0) = 0, h'(L) + αλ h(L) = 0, and ψ² = (κP − h)/λ where
// P(x) = ∫₀ˣ sβσ + x ∫ₓᴸ βσ. The Green function of h is again written with
// decaying kernels only (ν = |λ|).
class ParabolicPsi final : public ModeField {
 public:
  ParabolicPsi(const PlantConfig& cfg, int n, double lambda, bool zero_branch,
               const Quadrature& quad)
      : L_(cfg.L), kappa_(std::sqrt(2.0 / cfg.L)), k_(n * kPi / cfg.L), lambda_(lambda),
        alpha_(cfg.alpha), zero_(zero_branch), beta_is_zero_(cfg.beta.is_zero()) {
    nu_ = std::abs(lambda);
    sgn_ = lambda >= 0.0 ? 1.0 : -1.0;
    a1_ = sgn_ > 0 ? 1.0 + alpha_ : 1.0 - alpha_;
    a2_ = sgn_ > 0 ? 1.0 - alpha_ : 1.0 + alpha_;
    den_ = a1_ + a2_ * std::exp(-2.0 * nu_ * L_);
    if (beta_is_zero_) return;
    const BetaProfile beta = cfg.beta;
    const double k = k_, kappa = kappa_;
    poly_ = std::make_shared<DecayingCumulative>(
        [beta, k](double s) { return cplx(s * beta(s) * std::sin(k * s)); },
        [beta, k](double s) { return cplx(beta(s) * std::sin(k * s)); }, 0.0, quad.edges(),
        local_order(quad));
    gamma_zero_ = poly_->J1(L_).real();
    if (zero_) return;
    const double nu = nu_, sgn = sgn_, a1 = a1_, a2 = a2_, den = den_, L = L_;
    green_ = std::make_shared<DecayingCumulative>(
        [beta, k, kappa, nu, sgn](double s) {
          return cplx(-sgn * 0.5 * std::expm1(-2.0 * nu * s) * kappa * beta(s) * std::sin(k * s));
        },
        [beta, k, kappa, nu, a1, a2, den, L](double s) {
          return cplx((a1 + a2 * std::exp(-2.0 * nu * (L - s))) / den * kappa * beta(s) *
                      std::sin(k * s));
        },
        nu_, quad.edges(), local_order(quad));
    // γ·e^{−|λ|L} = J₁(L)/κ.
    gamma_scaled_ = green_->J1(L_).real() / kappa_;
  }

  double gamma_scaled() const { return zero_ ? gamma_zero_ : gamma_scaled_; }
  double gamma_log_scale() const { return zero_ ? 0.0 : nu_ * L_; }

  FieldValue at(double x) const override {
    FieldValue v = base(x);
    if (poly_) {
      couple(x, poly_->J1(x), poly_->J2(x), green_ ? green_->J1(x) : cplx(0.0),
             green_ ? green_->J2(x) : cplx(0.0), v);
    }
    return v;
  }

  std::vector<FieldValue> at_sorted(const std::vector<double>& xs) const override {
    std::vector<FieldValue> out(xs.size());
    std::vector<cplx> p1, p2, j1, j2;
    if (poly_) poly_->sweep(xs, p1, p2);
    if (green_) green_->sweep(xs, j1, j2);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out[i] = base(xs[i]);
      if (poly_) {
        couple(xs[i], p1[i], p2[i], green_ ? j1[i] : cplx(0.0), green_ ? j2[i] : cplx(0.0),
               out[i]);
      }
    }
    return out;
  }

 private:
  FieldValue base(double x) const {
    FieldValue v;
    v.f1 = kappa_ * std::sin(k_ * x);
    v.f1_x = kappa_ * k_ * std::cos(k_ * x);
    return v;
  }

  void couple(double x, cplx P1, cplx P2, cplx J1, cplx J2, FieldValue& v) const {
    const double P = (P1 + x * P2).real();
    const double dP = P2.real();
    if (zero_) {
      v.f2 = alpha_ * gamma_zero_ * kappa_ * x;
      v.f2_x = alpha_ * gamma_zero_ * kappa_;
      v.f3 = kappa_ * P;
      return;
    }
    const double e = std::exp(-2.0 * nu_ * (L_ - x));
    const double hd = (a1_ + a2_ * e) / den_;
    const double hdt = -sgn_ * (a1_ - a2_ * e) / den_;
    const double ss = -sgn_ * 0.5 * std::expm1(-2.0 * nu_ * x);
    const double cs = 0.5 * (1.0 + std::exp(-2.0 * nu_ * x));
    const double h = (hd * J1.real() + ss * J2.real()) / lambda_;
    const double dh = hdt * J1.real() + cs * J2.real();
    v.f2 = (kappa_ * P - h) / lambda_;
    v.f2_x = (kappa_ * dP - dh) / lambda_;
    v.f3 = h;
  }

  double L_, kappa_, k_, lambda_, alpha_;
  bool zero_, beta_is_zero_;
  double nu_ = 0.0, sgn_ = 1.0, a1_ = 0.0, a2_ = 0.0, den_ = 1.0;
  double gamma_zero_ = 0.0, gamma_scaled_ = 0.0;
  std::shared_ptr<DecayingCumulative> poly_, green_;
};

double hyperbolic_A(const PlantConfig& cfg, int m) {
  const double mu = cfg.mu(), L = cfg.L;
  return std::sqrt((mu * mu * L * L + m * m * kPi * kPi) * std::sinh(2.0 * mu * L)) /
         (L * std::sqrt(2.0 * mu));
}

void check_resolution(ModeIndex idx, const Quadrature& quad) {
  const int need = std::max(8, 2 * std::abs(idx.k));
  if (quad.panels() < need) {
    std::ostringstream os;
    os << "quadrature has " << quad.panels() << " panels but mode " << idx.label()
       << " needs at least " << need << "; use Quadrature::default_panels(" << std::abs(idx.k)
       << ") or more";
    throw ConfigError(os.str());
  }
}

EigenPair skeleton(const PlantConfig& cfg, ModeIndex idx) {
  if (idx.is_parabolic() && idx.k < 1) throw ConfigError("parabolic index must be >= 1");
  EigenPair p;
  p.index = idx;
  p.lambda = eigenvalue(cfg, idx);
  p.mu = cfg.mu();
  if (idx.is_hyperbolic()) {
    p.r = std::sqrt(p.lambda - cfg.c);  // principal branch, Re ≥ 0
    p.A_m = hyperbolic_A(cfg, idx.k);
  }
  return p;
}

std::shared_ptr<const ModeField> make_phi(const PlantConfig& cfg, const EigenPair& p,
                                          const Quadrature& quad, const SpectralOptions& opts) {
  if (p.index.is_parabolic()) {
    return std::make_shared<ParabolicPhi>(std::sqrt(2.0 / cfg.L), p.index.k * kPi / cfg.L);
  }
  return std::make_shared<HyperbolicPhi>(cfg, p.lambda, p.r, p.A_m * opts.phi_am_scale, quad);
}

void attach_psi(const PlantConfig& cfg, EigenPair& p, const Quadrature& quad) {
  if (p.index.is_hyperbolic()) {
    p.psi_field = std::make_shared<HyperbolicPsi>(p.lambda, p.A_m, cfg.L);
    return;
  }
  const double lam = p.lambda.real();
  p.zero_branch = std::abs(lam) < cfg.tol_zero();
  auto psi = std::make_shared<ParabolicPsi>(cfg, p.index.k, lam, p.zero_branch, quad);
  p.gamma_scaled = psi->gamma_scaled();
  p.gamma_log_scale = psi->gamma_log_scale();
  p.psi_field = std::move(psi);
}

}  // namespace

FieldValue operator*(cplx s, const FieldValue& v) {
  return {s * v.f1, s * v.f1_x, s * v.f2, s * v.f2_x, s * v.f3};
}

std::vector<FieldValue> ModeField::at_sorted(const std::vector<double>& xs) const {
  std::vector<FieldValue> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(at(x));
  return out;
}

FieldValue EigenPair::phi(double x) const {
  if (!phi_field) throw std::logic_error("eigenvector not populated");
  return phi_field->at(x);
}

FieldValue EigenPair::psi(double x) const {
  if (!psi_field) throw std::logic_error("dual eigenvector not populated");
  return psi_factor * psi_field->at(x);
}

std::vector<FieldValue> EigenPair::phi_at(const std::vector<double>& xs) const {
  if (!phi_field) throw std::logic_error("eigenvector not populated");
  return phi_field->at_sorted(xs);
}

std::vector<FieldValue> EigenPair::psi_at(const std::vector<double>& xs) const {
  if (!psi_field) throw std::logic_error("dual eigenvector not populated");
  auto v = psi_field->at_sorted(xs);
  if (psi_factor != 1.0) {
    for (auto& f : v) f = psi_factor * f;
  }
  return v;
}

double EigenPair::gamma() const {
  if (gamma_scaled == 0.0) return 0.0;
  return gamma_scaled * std::exp(gamma_log_scale);
}

Quadrature default_quadrature(const PlantConfig& cfg, int highest_index, int order) {
  return Quadrature(cfg.L, Quadrature::default_panels(highest_index), order,
                    cfg.beta.breakpoints());
}

cplx eigenvalue(const PlantConfig& cfg, ModeIndex idx) {
  if (idx.is_parabolic()) {
    const double k = idx.k * kPi / cfg.L;
    return cplx(cfg.c - k * k, 0.0);
  }
  return cplx(cfg.rho(), idx.k * kPi / cfg.L);
}

EigenPair eigenvector(const PlantConfig& cfg, ModeIndex idx, const Quadrature& quad,
                      const SpectralOptions& opts) {
  check_resolution(idx, quad);
  EigenPair p = skeleton(cfg, idx);
  p.phi_field = make_phi(cfg, p, quad, opts);
  return p;
}

EigenPair dual_eigenvector(const PlantConfig& cfg, ModeIndex idx, const Quadrature& quad) {
  check_resolution(idx, quad);
  EigenPair p = skeleton(cfg, idx);
  attach_psi(cfg, p, quad);
  return p;
}

EigenPair eigen_pair(const PlantConfig& cfg, ModeIndex idx, const Quadrature& quad,
                     const SpectralOptions& opts) {
  check_resolution(idx, quad);
  EigenPair p = skeleton(cfg, idx);
  p.phi_field = make_phi(cfg, p, quad, opts);
  attach_psi(cfg, p, quad);
  return p;
}

cplx inner_product_H0(const std::vector<FieldValue>& u, const std::vector<FieldValue>& v,
                      const Quadrature& quad) {
  const auto& w = quad.weights();
  if (u.size() != w.size() || v.size() != w.size()) {
    throw std::invalid_argument("field tables do not match the quadrature nodes");
  }
  cplx acc(0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i] * (u[i].f1 * std::conj(v[i].f1) + u[i].f2_x * std::conj(v[i].f2_x) +
                   u[i].f3 * std::conj(v[i].f3));
  }
  return acc;
}

EigenPair normalize_pair(const EigenPair& pair, const Quadrature& quad, double tol_biorth) {
  const cplx s = inner_product_H0(pair.phi_at(quad.nodes()), pair.psi_at(quad.nodes()), quad);
  if (std::abs(s) < 1e-12) {
    throw NumericalError("degenerate pairing <phi, psi> = 0 for mode " + pair.index.label());
  }
  EigenPair out = pair;
  out.normalization = 1.0;
  if (std::abs(s - 1.0) > tol_biorth) {
    // ⟨φ, cψ⟩ = conj(c)·s, so c = 1/conj(s).
    out.normalization = 1.0 / std::conj(s);
    out.psi_factor *= out.normalization;
  }
  return out;
}

BiorthogonalityReport biorthogonality_matrix(const PlantConfig& cfg, int n_max, int m_max,
                                             const Quadrature& quad, const SpectralOptions& opts) {
  BiorthogonalityReport rep;
  for (int n = 1; n <= n_max; ++n) rep.modes.push_back(ModeIndex::parabolic(n));
  for (int m : hyperbolic_order(m_max)) rep.modes.push_back(ModeIndex::hyperbolic(m));
  const std::size_t d = rep.modes.size();
  std::vector<std::vector<FieldValue>> phis(d), psis(d);
  for (std::size_t i = 0; i < d; ++i) {
    const EigenPair p = eigen_pair(cfg, rep.modes[i], quad, opts);
    phis[i] = p.phi_at(quad.nodes());
    psis[i] = p.psi_at(quad.nodes());
  }
  // Raw pairings: the diagonal tests the stated normalization constants.
  rep.gram.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      rep.gram(i, j) = inner_product_H0(phis[i], psis[j], quad);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    const cplx s = rep.gram(i, i);
    const cplx f = std::abs(s) < 1e-12 ? cplx(0.0) : 1.0 / std::conj(s);
    rep.factors.push_back(f);
    rep.max_diag_dev = std::max(rep.max_diag_dev, std::abs(s - 1.0));
    rep.max_factor_dev = std::max(rep.max_factor_dev, std::abs(f - 1.0));
    for (std::size_t j = 0; j < d; ++j) {
      if (i != j) rep.max_offdiag = std::max(rep.max_offdiag, std::abs(rep.gram(i, j)));
    }
  }
  return rep;
}

}  // namespace wavecascade
