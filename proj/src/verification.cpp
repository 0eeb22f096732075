#include "wavecascade/verification.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "wavecascade/spectral.hpp"

namespace wavecascade {

bool VerifyReport::all_ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.ok(); });
}

namespace {

constexpr std::array<double, 9> kD2 = {-1.0 / 560, 8.0 / 315, -1.0 / 5,  8.0 / 5, -205.0 / 72,
                                       8.0 / 5,    -1.0 / 5,  8.0 / 315, -1.0 / 560};
constexpr std::array<double, 9> kD1 = {1.0 / 280, -4.0 / 105, 1.0 / 5,   -4.0 / 5, 0.0,
                                       4.0 / 5,   -1.0 / 5,   4.0 / 105, -1.0 / 280};
constexpr int kStencilSamples = 97;

// Interior centres with their 9-point stencils flattened in ascending order.
struct Stencils {
  std::vector<double> centres, points;
  double h = 0.0;

  Stencils(double L, double freq) {
    h = std::min(1e-3 * L, 0.25 / std::max(freq, 1.0 / L));
    for (int j = 1; j < kStencilSamples; ++j) {
      const double x = L * j / kStencilSamples;
      if (x - 4 * h <= 0.0 || x + 4 * h >= L) continue;
      centres.push_back(x);
      for (int k = -4; k <= 4; ++k) points.push_back(x + k * h);
    }
  }

  template <class Get>
  cplx apply(const std::array<double, 9>& w, const std::vector<FieldValue>& v, std::size_t i,
             Get get, double scale) const {
    cplx acc = 0.0;
    for (int k = 0; k < 9; ++k) acc += w[k] * get(v[9 * i + k]);
    return acc / scale;
  }
};

double mode_frequency(const PlantConfig& cfg, const EigenPair& p) {
  return std::max({std::abs(p.r), std::abs(p.index.k) * std::numbers::pi / cfg.L,
                   std::sqrt(std::abs(p.lambda)), std::abs(p.lambda.imag())});
}

double sup(const std::vector<FieldValue>& v, cplx FieldValue::*m) {
  double s = 0.0;
  for (const auto& f : v) s = std::max(s, std::abs(f.*m));
  return s;
}

// |value| relative to scale; exact zero when there is nothing to compare to.
double rel(cplx value, double scale) {
  if (scale == 0.0) return std::abs(value) == 0.0 ? 0.0 : std::abs(value);
  return std::abs(value) / scale;
}

}  // namespace

ResidualReport eigen_residuals(const PlantConfig& cfg, const EigenPair& p) {
  const Stencils st(cfg.L, mode_frequency(cfg, p));
  const auto v = p.phi_at(st.points);
  const cplx lam = p.lambda;
  ResidualReport rep;
  const double s1x = sup(v, &FieldValue::f1_x), s2x = sup(v, &FieldValue::f2_x);
  for (std::size_t i = 0; i < st.centres.size(); ++i) {
    const FieldValue& f = v[9 * i + 4];
    const double x = st.centres[i];
    const cplx d2_1 = st.apply(kD2, v, i, [](const FieldValue& a) { return a.f1; }, st.h * st.h);
    const cplx d1_1 = st.apply(kD1, v, i, [](const FieldValue& a) { return a.f1; }, st.h);
    const cplx d2_2 = st.apply(kD2, v, i, [](const FieldValue& a) { return a.f2; }, st.h * st.h);
    const cplx d1_2 = st.apply(kD1, v, i, [](const FieldValue& a) { return a.f2; }, st.h);
    const double b = cfg.beta(x);
    // Heat row: f1'' + c f1 + β f2 = λ f1. Wave rows: f3 = λ f2, f2'' = λ f3.
    const cplx heat = d2_1 + cfg.c * f.f1 + b * f.f2 - lam * f.f1;
    const double heat_scale = std::abs(d2_1) + std::abs(cfg.c * f.f1) + std::abs(b * f.f2) +
                              std::abs(lam * f.f1);
    const cplx vel = f.f3 - lam * f.f2;
    const cplx wave = d2_2 - lam * f.f3;
    rep.ode = std::max({rep.ode, rel(heat, heat_scale),
                        rel(vel, std::abs(f.f3) + std::abs(lam * f.f2)),
                        rel(wave, std::abs(d2_2) + std::abs(lam * f.f3)),
                        rel(d1_1 - f.f1_x, s1x), rel(d1_2 - f.f2_x, s2x)});
  }
  const FieldValue a = p.phi(0.0), e = p.phi(cfg.L);
  const double s1 = sup(v, &FieldValue::f1), s2 = sup(v, &FieldValue::f2);
  rep.boundary = std::max({rel(a.f1, s1), rel(e.f1, s1), rel(a.f2, s2),
                           rel(e.f2_x + cfg.alpha * e.f3, std::abs(e.f2_x) + cfg.alpha * std::abs(e.f3))});
  return rep;
}

ResidualReport dual_parabolic_residuals(const PlantConfig& cfg, const EigenPair& p) {
  const Stencils st(cfg.L, mode_frequency(cfg, p));
  const auto v = p.psi_at(st.points);
  const double lam = p.lambda.real();
  ResidualReport rep;
  const double s2x = sup(v, &FieldValue::f2_x);
  for (std::size_t i = 0; i < st.centres.size(); ++i) {
    const FieldValue& f = v[9 * i + 4];
    const cplx d2_1 = st.apply(kD2, v, i, [](const FieldValue& a) { return a.f1; }, st.h * st.h);
    const cplx d2_2 = st.apply(kD2, v, i, [](const FieldValue& a) { return a.f2; }, st.h * st.h);
    const cplx d1_2 = st.apply(kD1, v, i, [](const FieldValue& a) { return a.f2; }, st.h);
    const cplx heat = d2_1 + cfg.c * f.f1 - lam * f.f1;
    const cplx wave = -d2_2 - lam * f.f3;
    rep.ode = std::max({rep.ode,
                        rel(heat, std::abs(d2_1) + std::abs(cfg.c * f.f1) + std::abs(lam * f.f1)),
                        rel(wave, std::abs(d2_2) + std::abs(lam * f.f3)), rel(d1_2 - f.f2_x, s2x)});
  }
  const FieldValue a = p.psi(0.0), e = p.psi(cfg.L);
  const double s1 = sup(v, &FieldValue::f1), s2 = sup(v, &FieldValue::f2),
               s3 = sup(v, &FieldValue::f3);
  rep.boundary = std::max({rel(a.f1, s1), rel(e.f1, s1), rel(a.f2, s2), rel(a.f3, s3),
                           rel(e.f2_x - cfg.alpha * e.f3, std::abs(e.f2_x) + cfg.alpha * std::abs(e.f3))});
  return rep;
}

namespace {

std::vector<ModeIndex> mode_range(int n_max, int m_max) {
  std::vector<ModeIndex> out;
  for (int n = 1; n <= n_max; ++n) out.push_back(ModeIndex::parabolic(n));
  for (int m = -m_max; m <= m_max; ++m) out.push_back(ModeIndex::hyperbolic(m));
  return out;
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

template <class F>
VerifyCheck guarded(const std::string& name, double tol, F&& body) {
  VerifyCheck c;
  c.name = name;
  c.tolerance = tol;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.passed = false;
    c.detail = std::string("error: ") + e.what();
  }
  return c;
}

}  // namespace

VerifyReport run_verification(const PlantConfig& cfg, const MeasurementSpec& spec,
                              const VerifyOptions& opts) {
  VerifyReport rep;
  const bool uncoupled = cfg.beta.is_zero();
  SpectralOptions sopts;
  sopts.phi_am_scale = opts.fault_am;
  const Quadrature quad = default_quadrature(cfg, std::max(opts.n_max, opts.m_max));
  const auto modes = mode_range(opts.n_max, opts.m_max);

  BiorthogonalityReport bio;
  rep.checks.push_back(guarded("biorthogonality", 1e-7, [&](VerifyCheck& c) {
    bio = biorthogonality_matrix(cfg, opts.n_max, opts.m_max, quad, sopts);
    c.value = std::max(bio.max_offdiag, bio.max_diag_dev);
    c.passed = c.value < c.tolerance && bio.max_factor_dev < 1e-3;
    c.detail = "offdiag " + sci(bio.max_offdiag) + ", diag " + sci(bio.max_diag_dev) +
               ", max |factor - 1| " + sci(bio.max_factor_dev);
  }));

  if (uncoupled) {
    rep.checks.push_back(guarded("decoupled structure", 1e-14, [&](VerifyCheck& c) {
      if (bio.gram.size() == 0) throw NumericalError("Gram matrix unavailable");
      double cross = 0.0;
      for (std::size_t i = 0; i < bio.modes.size(); ++i) {
        for (std::size_t j = 0; j < bio.modes.size(); ++j) {
          if (bio.modes[i].is_parabolic() != bio.modes[j].is_parabolic()) {
            cross = std::max(cross, std::abs(bio.gram(i, j)));
          }
        }
      }
      double heat = 0.0;  // heat component of hyperbolic φ
      for (int m = -opts.m_max; m <= opts.m_max; ++m) {
        const EigenPair p = eigenvector(cfg, ModeIndex::hyperbolic(m), quad, sopts);
        for (const auto& f : p.phi_at(quad.nodes())) heat = std::max(heat, std::abs(f.f1));
      }
      c.value = std::max(cross, heat);
      c.passed = c.value <= c.tolerance;
      c.detail = "cross-family Gram " + sci(cross) + ", heat part of wave modes " + sci(heat);
    }));
  }

  rep.checks.push_back(guarded("eigen residuals", 1e-6, [&](VerifyCheck& c) {
    double ode = 0.0, bc = 0.0;
    std::string worst;
    for (const auto& idx : modes) {
      const EigenPair p = eigen_pair(cfg, idx, quad, sopts);
      ResidualReport r = eigen_residuals(cfg, p);
      if (idx.is_parabolic()) {
        const ResidualReport d = dual_parabolic_residuals(cfg, p);
        r.ode = std::max(r.ode, d.ode);
        r.boundary = std::max(r.boundary, d.boundary);
      }
      if (std::max(r.ode, r.boundary) > std::max(ode, bc)) worst = idx.label();
      ode = std::max(ode, r.ode);
      bc = std::max(bc, r.boundary);
    }
    c.value = std::max(ode, bc);
    c.passed = c.value <= c.tolerance;
    c.detail = "ODE " + sci(ode) + ", boundary " + sci(bc) + (worst.empty() ? "" : ", worst " + worst);
  }));

  rep.checks.push_back(guarded("input-coefficient identity", 1e-8, [&](VerifyCheck& c) {
    double worst = 0.0;
    for (const auto& idx : modes) {
      const EigenPair p = normalize_pair(eigen_pair(cfg, idx, quad, sopts), quad);
      const ModalInputCoeffs ic = input_coeffs(cfg, p, quad);
      worst = std::max(worst, std::abs(ic.beta_coeff - ic.psi3_L_conj) / (1.0 + std::abs(ic.psi3_L_conj)));
    }
    c.value = worst;
    c.passed = worst <= c.tolerance;
    c.detail = "|(a + lambda b) - conj psi3(L)| / (1 + |psi3(L)|)";
  }));

  rep.checks.push_back(guarded("gamma closed form vs quadrature", 1e-10, [&](VerifyCheck& c) {
    std::mt19937 rng(opts.seed);
    std::uniform_real_distribution<double> u(0.0, cfg.L);
    const double b0 = cfg.beta.kind() == BetaProfile::Kind::Indicator ? cfg.beta.beta0() : 1.0;
    double worst = 0.0;
    int branch_mismatch = 0;
    for (int k = 0; k < opts.gamma_pairs; ++k) {
      double a = u(rng), b = u(rng);
      if (a > b) std::swap(a, b);
      PlantConfig work = cfg;
      work.beta = BetaProfile::indicator(b0, a, b);
      for (int n = 1; n <= opts.gamma_n_max; ++n) {
        const GammaCoefficient cf = gamma_closed_form_indicator(work, n);
        const GammaCoefficient qd = gamma(work, n);
        if (cf.branch != qd.branch || cf.log_scale != qd.log_scale) ++branch_mismatch;
        worst = std::max(worst, std::abs(cf.scaled - qd.scaled));
      }
    }
    c.value = worst;
    c.passed = worst <= c.tolerance && branch_mismatch == 0;
    c.detail = std::to_string(opts.gamma_pairs) + " random supports, n <= " +
               std::to_string(opts.gamma_n_max) + ", scaled values";
    if (branch_mismatch) c.detail += ", " + std::to_string(branch_mismatch) + " branch mismatches";
  }));

  const ReducedModel model = build_reduced_model(cfg, spec, opts.N0, opts.N0 + 1, opts.M);
  const KalmanReport ctrl = [&] {
    try {
      return check_controllability(model);
    } catch (const NumericalError& e) {
      KalmanReport r;
      r.what = e.what();
      return r;
    }
  }();
  rep.checks.push_back(guarded("controllability", 0.0, [&](VerifyCheck& c) {
    c.passed = ctrl.satisfied;
    c.value = ctrl.rank;
    c.detail = ctrl.what;
    if (!c.passed && uncoupled) {
      c.expected_failure = true;
      c.detail = "fails as expected: beta = 0 leaves the heat modes unreachable";
    }
  }));
  rep.checks.push_back(guarded("observability", 0.0, [&](VerifyCheck& c) {
    const KalmanReport obs = check_observability(model);
    c.passed = obs.satisfied;
    c.value = obs.rank;
    c.detail = obs.what;
  }));

  rep.checks.push_back(guarded("lyapunov residual", 1e-9, [&](VerifyCheck& c) {
    if (!ctrl.satisfied) {
      c.skipped = true;
      c.detail = "skipped: no stabilizing gains without controllability";
      return;
    }
    const GainSet g = design_gains(model, opts.K_targets, opts.L_targets);
    const ClosedLoopMatrices F = build_closed_loop_F(model, g);
    const LyapunovSolution sol = solve_lyapunov(F.F, cfg.delta);
    CertificateParams params;
    const Certificate cert = check_certificate(model, g, params, cfg.L);
    c.value = sol.residual;
    c.passed = sol.residual <= c.tolerance && sol.min_eig > 0.0 && cert.verdicts_agree;
    c.detail = "(N, M) = (" + std::to_string(model.N) + ", " + std::to_string(model.M) +
               "), min eig P " + sci(sol.min_eig) + ", theta routes " +
               (cert.verdicts_agree ? "agree" : "disagree");
  }));
  return rep;
}

void write_verify_table(std::ostream& os, const VerifyReport& rep) {
  os << std::left << std::setw(34) << "check" << std::setw(10) << "status" << std::setw(12)
     << "value" << std::setw(12) << "tolerance" << "detail\n";
  for (const auto& c : rep.checks) {
    const char* status = c.passed ? "PASS" : c.expected_failure ? "XFAIL" : c.skipped ? "SKIP" : "FAIL";
    os << std::left << std::setw(34) << c.name << std::setw(10) << status << std::setw(12)
       << sci(c.value) << std::setw(12) << sci(c.tolerance) << c.detail << '\n';
  }
  os << (rep.all_ok() ? "all checks passed\n" : "verification FAILED\n");
}

}  // namespace wavecascade
