#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "wavecascade/errors.hpp"
#include "wavecascade/spectral.hpp"

using namespace wavecascade;
using std::numbers::pi;

namespace {

PlantConfig benchmark() {
  PlantConfig cfg;
  cfg.L = 1.0;
  cfg.c = 10.0;
  cfg.beta = BetaProfile::polynomial({1.0, 0.0, 1.0});
  cfg.alpha = 1.1;
  cfg.delta = 1.0;
  return cfg;
}

PlantConfig uncoupled() {
  PlantConfig cfg = benchmark();
  cfg.beta = BetaProfile::constant(0.0);
  return cfg;
}

// Interior sample points together with their 9-point stencils, flattened in
// ascending order so one sorted evaluation serves every stencil.
struct StencilGrid {
  std::vector<double> centres;
  std::vector<double> points;
  double h;
  StencilGrid(double L, int samples, double h_) : h(h_) {
    for (int j = 1; j < samples; ++j) {
      const double x = L * j / samples;
      if (x - 4 * h <= 0.0 || x + 4 * h >= L) continue;
      centres.push_back(x);
      for (int k = -4; k <= 4; ++k) points.push_back(x + k * h);
    }
  }
  std::size_t centre_slot(std::size_t i) const { return 9 * i + 4; }
};

double fd_step(double freq) { return std::min(1e-3, 0.25 / std::max(freq, 1.0)); }

double sup(const std::vector<FieldValue>& v, cplx FieldValue::*m) {
  double s = 0.0;
  for (const auto& f : v) s = std::max(s, std::abs(f.*m));
  return s;
}

}  // namespace

TEST(ValidateConfig, SectionSixIsAdmissible) {
  const PlantConfig cfg = benchmark();
  const auto rep = validate_config(cfg, 1e-9);
  EXPECT_TRUE(rep.ok);
  EXPECT_NEAR(cfg.rho(), 0.5 * std::log(0.1 / 2.1), 1e-15);
  EXPECT_NEAR(cfg.rho(), -1.5222, 1e-4);
}

TEST(ValidateConfig, AlphaConditionEqualityIsReported) {
  PlantConfig cfg = uncoupled();
  cfg.c = cfg.rho() + pi * pi;
  const auto rep = validate_config(cfg, 1e-9);
  EXPECT_FALSE(rep.ok);
  ASSERT_EQ(rep.alpha_condition_failures.size(), 1u);
  EXPECT_EQ(rep.alpha_condition_failures[0], 1);
}

TEST(ValidateConfig, DecayTargetBeyondRhoIsReported) {
  PlantConfig cfg = benchmark();
  cfg.delta = 2.0;
  const auto rep = validate_config(cfg, 1e-9);
  EXPECT_FALSE(rep.ok);
  EXPECT_TRUE(rep.rho_violation);
}

TEST(ValidateConfig, AlphaAtMostOneIsRejected) {
  PlantConfig cfg = benchmark();
  cfg.alpha = 0.5;
  EXPECT_THROW(validate_config(cfg, 1e-9), ConfigError);
  cfg.alpha = 1.0;
  EXPECT_THROW(validate_config(cfg, 1e-9), ConfigError);
}

TEST(ValidateConfig, IndicatorBoundsAreChecked) {
  PlantConfig cfg = benchmark();
  cfg.beta = BetaProfile::indicator(1.0, 0.7, 0.3);
  EXPECT_FALSE(validate_config(cfg).ok);
  cfg.beta = BetaProfile::indicator(0.0, 0.1, 0.3);
  EXPECT_FALSE(validate_config(cfg).ok);
  cfg.beta = BetaProfile::indicator(2.0, 0.1, 0.3);
  EXPECT_TRUE(validate_config(cfg).ok);
}

TEST(Eigenvalue, ClosedForms) {
  const PlantConfig cfg = benchmark();
  EXPECT_NEAR(eigenvalue(cfg, ModeIndex::parabolic(1)).real(), 10.0 - pi * pi, 1e-14);
  EXPECT_NEAR(eigenvalue(cfg, ModeIndex::parabolic(1)).real(), 0.1304, 1e-4);
  const cplx h0 = eigenvalue(cfg, ModeIndex::hyperbolic(0));
  EXPECT_EQ(h0.imag(), 0.0);
  EXPECT_DOUBLE_EQ(h0.real(), cfg.rho());
  const cplx h3 = eigenvalue(cfg, ModeIndex::hyperbolic(3));
  EXPECT_NEAR(h3.real(), -1.5222, 1e-4);
  EXPECT_NEAR(h3.imag(), 3 * pi, 1e-13);
}

TEST(Eigenvector, ParabolicSineAtQuarterPeriod) {
  PlantConfig cfg = benchmark();
  cfg.L = 2.0;
  const Quadrature q = default_quadrature(cfg, 2);
  const EigenPair p = eigenvector(cfg, ModeIndex::parabolic(2), q);
  const FieldValue v = p.phi(cfg.L / 4);
  EXPECT_NEAR(v.f1.real(), std::sqrt(2.0 / cfg.L), 1e-15);
  EXPECT_EQ(v.f2, cplx(0.0));
  EXPECT_EQ(v.f3, cplx(0.0));
}

TEST(Eigenvector, UncoupledHyperbolicHasNoHeatComponent) {
  const PlantConfig cfg = uncoupled();
  const Quadrature q = default_quadrature(cfg, 9);
  for (int m : {0, -4, 9}) {
    const EigenPair p = eigenvector(cfg, ModeIndex::hyperbolic(m), q);
    for (double x : {0.1, 0.5, 0.93}) EXPECT_EQ(p.phi(x).f1, cplx(0.0));
  }
}

TEST(Eigenvector, RefusesUnderResolvedQuadrature) {
  const PlantConfig cfg = benchmark();
  const Quadrature q(cfg.L, 10);
  EXPECT_NO_THROW(eigenvector(cfg, ModeIndex::hyperbolic(5), q));
  EXPECT_THROW(eigenvector(cfg, ModeIndex::hyperbolic(6), q), ConfigError);
}

TEST(Eigenvector, PrincipalRootAndNormalization) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 40);
  for (int m : {-40, -3, 0, 1, 17}) {
    const EigenPair p = eigenvector(cfg, ModeIndex::hyperbolic(m), q);
    EXPECT_GE(p.r.real(), 0.0);
    EXPECT_LT(std::abs(p.r * p.r - (p.lambda - cfg.c)), 1e-12 * std::abs(p.lambda - cfg.c));
    const double mu = cfg.mu();
    const double A = std::sqrt((mu * mu + m * m * pi * pi) * std::sinh(2 * mu)) / std::sqrt(2 * mu);
    EXPECT_NEAR(p.A_m, A, 1e-13 * A);
  }
}

class HyperbolicResidual : public ::testing::TestWithParam<int> {};

TEST_P(HyperbolicResidual, EigenEquationHolds) {
  const PlantConfig cfg = benchmark();
  const int m = GetParam();
  const Quadrature q = default_quadrature(cfg, m);
  const EigenPair p = eigenvector(cfg, ModeIndex::hyperbolic(m), q);
  const StencilGrid g(cfg.L, 97, fd_step(std::max(std::abs(p.r), std::abs(m) * pi)));
  const auto vals = p.phi_at(g.points);
  std::vector<cplx> f1(vals.size()), f2(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    f1[i] = vals[i].f1;
    f2[i] = vals[i].f2;
  }
  const double scale = sup(vals, &FieldValue::f1);
  ASSERT_GT(scale, 0.0);
  double res = 0.0, dres = 0.0, d2res = 0.0;
  for (std::size_t i = 0; i < g.centres.size(); ++i) {
    const std::size_t c = g.centre_slot(i);
    const double x = g.centres[i];
    const cplx d2 = oracle::stencil(oracle::kD2, f1, c, g.h * g.h);
    res = std::max(res, std::abs(d2 + cfg.c * f1[c] + cfg.beta(x) * f2[c] - p.lambda * f1[c]));
    dres = std::max(dres, std::abs(oracle::stencil(oracle::kD1, f1, c, g.h) - vals[c].f1_x));
    d2res = std::max(d2res, std::abs(oracle::stencil(oracle::kD1, f2, c, g.h) - vals[c].f2_x));
  }
  EXPECT_LT(res, 1e-6 * scale) << "m = " << m;
  EXPECT_LT(dres, 1e-6 * sup(vals, &FieldValue::f1_x));
  EXPECT_LT(d2res, 1e-6 * sup(vals, &FieldValue::f2_x));

  EXPECT_LT(std::abs(p.phi(0.0).f1), 1e-10 * scale);
  EXPECT_LT(std::abs(p.phi(cfg.L).f1), 1e-10 * scale);
  const FieldValue end = p.phi(cfg.L);
  EXPECT_LT(std::abs(end.f2_x + cfg.alpha * end.f3),
            1e-8 * std::max(std::abs(end.f2_x), std::abs(end.f3)));
}

INSTANTIATE_TEST_SUITE_P(Modes, HyperbolicResidual, ::testing::Values(0, 1, -3, 7, -20, 40));

TEST(Eigenvector, SmallRootKernelMatchesGenericBranch) {
  // c = ρ makes r₀ = 0 exactly; nudging c switches to the generic branch.
  PlantConfig cfg = benchmark();
  cfg.c = cfg.rho();
  const Quadrature q = default_quadrature(cfg, 0);
  const EigenPair p0 = eigenvector(cfg, ModeIndex::hyperbolic(0), q);
  ASSERT_LT(std::abs(p0.r), 1e-8);
  cfg.c = cfg.rho() - 1e-6;
  const EigenPair p1 = eigenvector(cfg, ModeIndex::hyperbolic(0), q);
  ASSERT_GT(std::abs(p1.r), 1e-8);
  for (double x : {0.2, 0.5, 0.8}) {
    EXPECT_NEAR(std::abs(p0.phi(x).f1 - p1.phi(x).f1), 0.0, 1e-5);
    EXPECT_NEAR(std::abs(p0.phi(x).f1_x - p1.phi(x).f1_x), 0.0, 1e-5);
  }
}

class ParabolicAdjoint : public ::testing::TestWithParam<int> {};

TEST_P(ParabolicAdjoint, AdjointEquationsAndBoundaryCondition) {
  const PlantConfig cfg = benchmark();
  const int n = GetParam();
  const Quadrature q = default_quadrature(cfg, n);
  const EigenPair p = dual_eigenvector(cfg, ModeIndex::parabolic(n), q);
  const double lam = p.lambda.real();
  const StencilGrid g(cfg.L, 97, fd_step(std::max(std::abs(lam), n * pi)));
  const auto vals = p.psi_at(g.points);
  std::vector<cplx> f1(vals.size()), f2(vals.size()), f3(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    f1[i] = vals[i].f1;
    f2[i] = vals[i].f2;
    f3[i] = vals[i].f3;
  }
  const double s1 = sup(vals, &FieldValue::f1);
  const double s2 = std::max(sup(vals, &FieldValue::f2) * lam * lam, std::abs(lam) * sup(vals, &FieldValue::f3));
  double r1 = 0, r2 = 0, r3 = 0;
  for (std::size_t i = 0; i < g.centres.size(); ++i) {
    const std::size_t c = g.centre_slot(i);
    r1 = std::max(r1, std::abs(oracle::stencil(oracle::kD2, f1, c, g.h * g.h) + cfg.c * f1[c] -
                               lam * f1[c]));
    r2 = std::max(r2, std::abs(-oracle::stencil(oracle::kD2, f2, c, g.h * g.h) - lam * f3[c]));
    r3 = std::max(r3, std::abs(oracle::stencil(oracle::kD1, f2, c, g.h) - vals[c].f2_x));
  }
  EXPECT_LT(r1, 1e-6 * s1 * std::max(1.0, std::abs(lam)));
  EXPECT_LT(r2, 1e-6 * s2) << "n = " << n;
  EXPECT_LT(r3, 1e-6 * sup(vals, &FieldValue::f2_x));

  const FieldValue end = p.psi(cfg.L);
  EXPECT_LT(std::abs(end.f2_x - cfg.alpha * end.f3),
            1e-8 * std::max(std::abs(end.f2_x), std::abs(end.f3)));
  const FieldValue start = p.psi(0.0);
  EXPECT_LT(std::abs(start.f2), 1e-12 * std::max(1.0, sup(vals, &FieldValue::f2)));
  EXPECT_LT(std::abs(start.f3), 1e-12 * std::max(1.0, sup(vals, &FieldValue::f3)));
}

INSTANTIATE_TEST_SUITE_P(Modes, ParabolicAdjoint, ::testing::Values(1, 2, 5, 12));

TEST(DualEigenvector, HyperbolicHeatComponentVanishes) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 6);
  for (int m : {0, -6, 5}) {
    const EigenPair p = dual_eigenvector(cfg, ModeIndex::hyperbolic(m), q);
    for (double x : {0.0, 0.33, 1.0}) EXPECT_EQ(p.psi(x).f1, cplx(0.0));
    const FieldValue end = p.psi(cfg.L);
    EXPECT_LT(std::abs(end.f2_x - cfg.alpha * end.f3), 1e-12 * std::abs(end.f3));
  }
}

TEST(DualEigenvector, UncoupledParabolicHasNoWaveComponent) {
  const PlantConfig cfg = uncoupled();
  const Quadrature q = default_quadrature(cfg, 3);
  for (int n : {1, 3}) {
    const EigenPair p = dual_eigenvector(cfg, ModeIndex::parabolic(n), q);
    EXPECT_EQ(p.gamma(), 0.0);
    for (double x : {0.2, 0.7}) {
      EXPECT_EQ(p.psi(x).f2, cplx(0.0));
      EXPECT_EQ(p.psi(x).f3, cplx(0.0));
    }
  }
}

namespace {

// The dual parabolic eigenvector written literally, every integral by
// Simpson, nested integrals included.
struct LiteralPsi {
  PlantConfig cfg;
  int n;
  double lam, kappa, k, gamma;

  LiteralPsi(PlantConfig c, int n_) : cfg(std::move(c)), n(n_) {
    k = n * pi / cfg.L;
    lam = cfg.c - k * k;
    kappa = std::sqrt(2.0 / cfg.L);
    if (lam != 0.0) {
      gamma = oracle::simpson(
          [&](double s) { return cfg.beta(s) * std::sin(k * s) * std::sinh(lam * s); }, 0.0, cfg.L);
    } else {
      gamma = iterated(cfg.L);
    }
  }

  double inner_tail(double tau) const {
    return oracle::simpson([&](double s) { return cfg.beta(s) * std::sin(k * s); }, tau, cfg.L,
                           400);
  }
  double iterated(double x) const {
    return oracle::simpson([&](double t) { return inner_tail(t); }, 0.0, x, 400);
  }

  double psi2(double x) const {
    if (lam == 0.0) return cfg.alpha * gamma * kappa * x;
    const double D = std::cosh(lam * cfg.L) + cfg.alpha * std::sinh(lam * cfg.L);
    const double E = std::cosh(lam * (x - cfg.L)) - cfg.alpha * std::sinh(lam * (x - cfg.L));
    const double I = oracle::simpson(
        [&](double s) { return cfg.beta(s) * std::sin(k * s) * std::sinh(lam * (x - s)); }, x,
        cfg.L);
    return -gamma / (lam * lam * D) * kappa * E - kappa * I / (lam * lam) +
           kappa * iterated(x) / lam;
  }

  double psi3(double x) const {
    if (lam == 0.0) return kappa * iterated(x);
    const double D = std::cosh(lam * cfg.L) + cfg.alpha * std::sinh(lam * cfg.L);
    const double E = std::cosh(lam * (x - cfg.L)) - cfg.alpha * std::sinh(lam * (x - cfg.L));
    const double I = oracle::simpson(
        [&](double s) { return cfg.beta(s) * std::sin(k * s) * std::sinh(lam * (x - s)); }, x,
        cfg.L);
    return gamma / (lam * D) * kappa * E + kappa * I / lam;
  }
};

}  // namespace

TEST(DualEigenvector, MatchesLiteralFormula) {
  // The literal form cancels terms of size e^{|λ|L}; compare only where that
  // stays small, on both signs of λ.
  struct Case {
    double L, c;
    int n;
  };
  for (const Case& cs : {Case{1.0, 10.0, 1}, Case{2.0, 10.0, 2}, Case{1.0, 9.0, 1},
                         Case{1.0, 35.0, 2}, Case{1.0, 40.0, 2}}) {
    PlantConfig cfg = benchmark();
    cfg.L = cs.L;
    cfg.c = cs.c;
    ASSERT_TRUE(validate_config(cfg).alpha_condition_failures.empty());
    const Quadrature q = default_quadrature(cfg, cs.n);
    const EigenPair p = dual_eigenvector(cfg, ModeIndex::parabolic(cs.n), q);
    const LiteralPsi lit(cfg, cs.n);
    ASSERT_LT(std::abs(lit.lam) * cfg.L, 5.0);
    EXPECT_NEAR(p.gamma(), lit.gamma, 1e-10 * std::abs(lit.gamma));
    EXPECT_FALSE(p.zero_branch);
    for (double t : {0.0, 0.13, 0.5, 0.77, 1.0}) {
      const double x = t * cfg.L;
      const FieldValue v = p.psi(x);
      const double a2 = lit.psi2(x), a3 = lit.psi3(x);
      EXPECT_NEAR(v.f2.real(), a2, 1e-8 * std::max(1.0, std::abs(a2))) << "n=" << cs.n << " x=" << x;
      EXPECT_NEAR(v.f3.real(), a3, 1e-8 * std::max(1.0, std::abs(a3))) << "n=" << cs.n << " x=" << x;
    }
  }
}

TEST(DualEigenvector, ZeroBranchMatchesLiteralFormulaAndIsContinuous) {
  PlantConfig cfg = benchmark();
  cfg.c = pi * pi;
  const Quadrature q = default_quadrature(cfg, 1);
  const EigenPair p = dual_eigenvector(cfg, ModeIndex::parabolic(1), q);
  ASSERT_TRUE(p.zero_branch);
  const LiteralPsi lit(cfg, 1);
  EXPECT_NEAR(p.gamma(), lit.gamma, 1e-10 * std::abs(lit.gamma));
  for (double x : {0.1, 0.6, 1.0}) {
    EXPECT_NEAR(p.psi(x).f2.real(), lit.psi2(x), 1e-9);
    EXPECT_NEAR(p.psi(x).f3.real(), lit.psi3(x), 1e-9);
  }
  // Analytic continuity across the branch split.
  PlantConfig near = cfg;
  near.c = pi * pi + 1e-5;
  const EigenPair pn = dual_eigenvector(near, ModeIndex::parabolic(1), q);
  ASSERT_FALSE(pn.zero_branch);
  for (double x : {0.1, 0.6, 1.0}) {
    EXPECT_NEAR(pn.psi(x).f2.real(), p.psi(x).f2.real(), 1e-4);
    EXPECT_NEAR(pn.psi(x).f3.real(), p.psi(x).f3.real(), 1e-4);
  }
}

TEST(DualEigenvector, LargeIndexGammaIsScaledNotOverflowed) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 12);
  const EigenPair p = dual_eigenvector(cfg, ModeIndex::parabolic(12), q);
  EXPECT_TRUE(std::isfinite(p.gamma_scaled));
  EXPECT_NEAR(p.gamma_log_scale, std::abs(p.lambda.real()) * cfg.L, 1e-9);
  const FieldValue v = p.psi(0.5);
  EXPECT_TRUE(std::isfinite(std::abs(v.f2)) && std::isfinite(std::abs(v.f3)));
}

TEST(InnerProduct, ParabolicEigenvectorsAreUnit) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 10);
  for (int n = 1; n <= 10; ++n) {
    const EigenPair p = eigenvector(cfg, ModeIndex::parabolic(n), q);
    const cplx s = inner_product_H0([&](double x) { return p.phi(x); },
                                    [&](double x) { return p.phi(x); }, q);
    EXPECT_NEAR(s.real(), 1.0, 1e-13);
    EXPECT_NEAR(s.imag(), 0.0, 1e-15);
  }
}

TEST(InnerProduct, UncoupledCrossFamilyPairingVanishes) {
  const PlantConfig cfg = uncoupled();
  const Quadrature q = default_quadrature(cfg, 4);
  const EigenPair a = eigenvector(cfg, ModeIndex::parabolic(2), q);
  const EigenPair b = dual_eigenvector(cfg, ModeIndex::hyperbolic(-4), q);
  EXPECT_EQ(inner_product_H0(a.phi_at(q.nodes()), b.psi_at(q.nodes()), q), cplx(0.0));
}

TEST(InnerProduct, HyperbolicPairingIsUnitForSectionSix) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 3);
  const EigenPair p = eigen_pair(cfg, ModeIndex::hyperbolic(3), q);
  const cplx s = inner_product_H0(p.phi_at(q.nodes()), p.psi_at(q.nodes()), q);
  EXPECT_LT(std::abs(s - 1.0), 1e-7);
}

TEST(InnerProduct, TabulatedMatchesPointwise) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 8);
  const EigenPair p = eigen_pair(cfg, ModeIndex::hyperbolic(-8), q);
  const cplx a = inner_product_H0(p.phi_at(q.nodes()), p.psi_at(q.nodes()), q);
  const cplx b = inner_product_H0([&](double x) { return p.phi(x); },
                                  [&](double x) { return p.psi(x); }, q);
  EXPECT_LT(std::abs(a - b), 1e-13);
}

TEST(NormalizePair, FixedPointAndRescaling) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 2);
  const EigenPair p = normalize_pair(eigen_pair(cfg, ModeIndex::hyperbolic(2), q), q);
  const EigenPair again = normalize_pair(p, q);
  EXPECT_EQ(again.normalization, cplx(1.0));

  EigenPair doubled = p;
  doubled.psi_factor *= 2.0;
  const EigenPair fixed = normalize_pair(doubled, q);
  EXPECT_LT(std::abs(fixed.normalization - 0.5), 1e-12);
  const cplx s = inner_product_H0(fixed.phi_at(q.nodes()), fixed.psi_at(q.nodes()), q);
  EXPECT_LT(std::abs(s - 1.0), kTolBiorth);
}

TEST(NormalizePair, SectionSixParabolicFactorIsNearOne) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 1);
  const EigenPair p = normalize_pair(eigen_pair(cfg, ModeIndex::parabolic(1), q), q);
  EXPECT_LT(std::abs(p.normalization - 1.0), 1e-6);
}

TEST(NormalizePair, DegeneratePairingIsAnError) {
  const Quadrature q = default_quadrature(uncoupled(), 2);
  EigenPair uncoupled_mix = eigen_pair(uncoupled(), ModeIndex::parabolic(2), q);
  uncoupled_mix.psi_field = dual_eigenvector(uncoupled(), ModeIndex::hyperbolic(2), q).psi_field;
  EXPECT_THROW(normalize_pair(uncoupled_mix, q), NumericalError);
}

TEST(Biorthogonality, UncoupledIsIdentity) {
  const PlantConfig cfg = uncoupled();
  const Quadrature q = default_quadrature(cfg, 6);
  const auto rep = biorthogonality_matrix(cfg, 6, 6, q);
  ASSERT_EQ(rep.modes.size(), 6u + 13u);
  EXPECT_LT(rep.max_offdiag, 1e-12);
  EXPECT_LT(rep.max_diag_dev, 1e-12);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 6; j < rep.modes.size(); ++j) {
      EXPECT_EQ(rep.gram(i, j), cplx(0.0));
      EXPECT_EQ(rep.gram(j, i), cplx(0.0));
    }
  }
}

TEST(Biorthogonality, SectionSixUpToTwenty) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 20);
  const auto rep = biorthogonality_matrix(cfg, 20, 20, q);
  ASSERT_EQ(rep.modes.size(), 20u + 41u);
  EXPECT_LT(rep.max_offdiag, 1e-7);
  EXPECT_LT(rep.max_diag_dev, 1e-7);
}

TEST(Biorthogonality, SmallestInstance) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 1);
  const auto rep = biorthogonality_matrix(cfg, 1, 0, q);
  ASSERT_EQ(rep.gram.rows(), 2);
  EXPECT_LT((rep.gram - Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Biorthogonality, CorruptedNormalizationIsDetected) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 4);
  SpectralOptions bad;
  bad.phi_am_scale = 1.01;
  const auto rep = biorthogonality_matrix(cfg, 4, 4, q, bad);
  EXPECT_GT(rep.max_diag_dev, 5e-3);
  EXPECT_GT(rep.max_factor_dev, 1e-3);
}

TEST(HeatPartDecay, HeatComponentOfHyperbolicModes) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 64);
  std::vector<double> ms, l2, dsup;
  for (int m : {8, 12, 16, 24, 32, 48, 64}) {
    const EigenPair p = eigenvector(cfg, ModeIndex::hyperbolic(m), q);
    const auto v = p.phi_at(q.nodes());
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) acc += q.weights()[i] * std::norm(v[i].f1);
    ms.push_back(m);
    l2.push_back(std::sqrt(acc));
    dsup.push_back(sup(v, &FieldValue::f1_x));
  }
  EXPECT_LE(oracle::loglog_slope(ms, l2), -1.8);
  EXPECT_LE(oracle::loglog_slope(ms, dsup), -1.3);
}
