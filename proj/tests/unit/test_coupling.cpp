#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "wavecascade/coupling.hpp"

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

PlantConfig gamma_root(double b) {
  PlantConfig cfg;
  cfg.L = 1.0;
  cfg.c = 50.0;
  cfg.beta = BetaProfile::indicator(1.0, 0.0, b);
  cfg.alpha = 1.1;
  cfg.delta = 1.0;
  return cfg;
}

// The constant-β closed form, written as printed.
double constant_beta_gamma(double L, double c, double beta0, int n) {
  const double k2 = n * n * pi * pi / (L * L);
  return std::pow(-1.0, n) * beta0 * (n * pi / L) / ((k2 - c) * (k2 - c) + k2) *
         std::sinh((k2 - c) * L);
}

}  // namespace

TEST(Gamma, VanishesWithoutCoupling) {
  PlantConfig cfg = benchmark();
  cfg.beta = BetaProfile::constant(0.0);
  for (int n = 1; n <= 10; ++n) EXPECT_EQ(gamma(cfg, n).value, 0.0);
}

TEST(Gamma, ConstantProfileFirstMode) {
  PlantConfig cfg = benchmark();
  cfg.beta = BetaProfile::constant(1.0);
  const GammaCoefficient g = gamma(cfg, 1);
  EXPECT_EQ(g.branch, GammaCoefficient::Branch::Generic);
  EXPECT_NEAR(g.value, constant_beta_gamma(1.0, 10.0, 1.0, 1), 1e-14);
  const double brute = oracle::simpson(
      [](double s) { return std::sin(pi * s) * std::sinh((10.0 - pi * pi) * s); }, 0.0, 1.0);
  EXPECT_NEAR(g.value, brute, 1e-12);
  EXPECT_NEAR(g.value, 0.04155, 5e-5);
}

TEST(Gamma, ZeroEigenvalueBranchIteratedIntegral) {
  PlantConfig cfg = benchmark();
  cfg.c = pi * pi;
  cfg.beta = BetaProfile::constant(1.0);
  const GammaCoefficient g = gamma(cfg, 1);
  EXPECT_EQ(g.branch, GammaCoefficient::Branch::ZeroEigenvalue);
  const double brute = oracle::simpson(
      [](double tau) {
        return oracle::simpson([](double s) { return std::sin(pi * s); }, tau, 1.0, 400);
      },
      0.0, 1.0, 400);
  EXPECT_NEAR(g.value, brute, 1e-10);
  EXPECT_NEAR(g.value, 1.0 / pi, 1e-12);
  // Constant-β zero-branch value as printed: (−1)^{n+1} β₀ L²/(nπ).
  EXPECT_NEAR(g.value, 1.0 / pi, 1e-12);
}

TEST(Gamma, HomogeneousInBeta) {
  const PlantConfig cfg = benchmark();
  for (double s : {-1.0, 2.0, 10.0}) {
    PlantConfig scaled = cfg;
    scaled.beta = cfg.beta.scaled(s);
    for (int n = 1; n <= 12; ++n) {
      const auto g0 = gamma(cfg, n), g1 = gamma(scaled, n);
      EXPECT_NEAR(g1.scaled, s * g0.scaled, 1e-13 * std::abs(s * g0.scaled) + 1e-300);
      EXPECT_EQ(g1.log_scale, g0.log_scale);
    }
  }
}

TEST(Gamma, LargeIndexStaysFinite) {
  const PlantConfig cfg = benchmark();
  const GammaCoefficient g = gamma(cfg, 40);
  EXPECT_TRUE(std::isfinite(g.scaled));
  EXPECT_NE(g.scaled, 0.0);
  EXPECT_TRUE(std::isinf(g.value));
  EXPECT_LE(std::abs(g.scaled), g.magnitude * (1 + 1e-12));
}

TEST(GammaClosedForm, ConstantSupportMatchesPrintedFormula) {
  for (int n = 1; n <= 6; ++n) {
    PlantConfig cfg = benchmark();
    cfg.beta = BetaProfile::indicator(1.7, 0.0, 1.0);
    const double printed = constant_beta_gamma(1.0, 10.0, 1.7, n);
    const GammaCoefficient g = gamma_closed_form_indicator(cfg, n);
    EXPECT_NEAR(g.value, printed, 1e-12 * std::max(1.0, std::abs(printed)));
    EXPECT_NE(g.value, 0.0);
  }
}

TEST(GammaClosedForm, ZeroWidthSupportIsZero) {
  PlantConfig cfg = benchmark();
  cfg.beta = BetaProfile::indicator(1.0, 0.4, 0.4);
  EXPECT_EQ(gamma_closed_form_indicator(cfg, 3).value, 0.0);
}

TEST(GammaClosedForm, RejectsOtherProfiles) {
  EXPECT_THROW(gamma_closed_form_indicator(benchmark(), 1), ConfigError);
}

TEST(GammaClosedForm, AgreesWithQuadrature) {
  struct Case {
    double c, a, b;
  };
  for (const Case& cs : {Case{10, 0.0, 1.0}, Case{10, 0.2, 0.7}, Case{50, 0.0, 0.586},
                         Case{50, 0.31, 0.93}, Case{pi * pi, 0.1, 0.6}, Case{-3, 0.5, 1.0}}) {
    PlantConfig cfg = benchmark();
    cfg.c = cs.c;
    cfg.beta = BetaProfile::indicator(-2.5, cs.a, cs.b);
    for (int n = 1; n <= 10; ++n) {
      const auto closed = gamma_closed_form_indicator(cfg, n);
      const auto quad = gamma(cfg, n);
      EXPECT_EQ(closed.branch, quad.branch);
      EXPECT_EQ(closed.log_scale, quad.log_scale);
      EXPECT_NEAR(closed.scaled, quad.scaled, 1e-10) << "c=" << cs.c << " n=" << n;
    }
  }
}

TEST(GammaClosedForm, GammaRootValues) {
  // Reference values from a 40-digit mpmath quadrature of the defining integral:
  // the root sits at b = 0.58567834946637727 and γ₂(0.586) = −0.039257856231600655.
  const GammaCoefficient g = gamma_closed_form_indicator(gamma_root(0.586), 2);
  EXPECT_NEAR(g.value, -0.039257856231600655, 1e-12);
  const GammaCoefficient r = gamma_closed_form_indicator(gamma_root(0.58567834946637727), 2);
  EXPECT_LT(std::abs(r.value), 1e-10);
}

TEST(GammaScan, GammaRootHasSingleRootNearReference) {
  const GammaScan scan = gamma_scan(gamma_root(1.0), 2, 0.0, 1.0, 201);
  ASSERT_EQ(scan.roots.size(), 1u);
  EXPECT_NEAR(scan.roots[0].b, 0.586, 0.005);
  EXPECT_NEAR(scan.roots[0].b, 0.58567834946637727, 1e-12);
  EXPECT_TRUE(scan.roots[0].converged);
  EXPECT_LT(std::abs(gamma_closed_form_indicator(gamma_root(scan.roots[0].b), 2).value), 1e-10);
  EXPECT_EQ(scan.b.size(), 200u);  // b = 0 is skipped
}

TEST(GammaScan, EveryRootIsRefined) {
  for (int n : {1, 3, 4}) {
    const GammaScan scan = gamma_scan(gamma_root(1.0), n, 0.0, 1.0, 401);
    const double k = n * pi, lam = 50.0 - k * k;
    for (const auto& r : scan.roots) {
      EXPECT_TRUE(r.converged);
      const double g = std::abs(gamma_closed_form_indicator(gamma_root(r.b), n).value);
      if (r.resolution_limited) {
        // ∂γ/∂b = β₀ sin(kb) sinh(λb); one ulp of b moves γ by that much.
        const double slope = std::abs(std::sin(k * r.b) * std::sinh(lam * r.b));
        const double ulp = std::nextafter(r.b, 2.0) - r.b;
        EXPECT_LT(g, 8.0 * slope * ulp) << "n=" << n << " b=" << r.b;
      } else {
        EXPECT_LT(g, 1e-10) << "n=" << n << " b=" << r.b;
      }
    }
    if (n >= 3) {
      EXPECT_FALSE(scan.roots.empty()) << "n = " << n;
    }
  }
}

TEST(GammaScan, RootSetInvariantUnderScaling) {
  PlantConfig cfg = gamma_root(1.0);
  const GammaScan s1 = gamma_scan(cfg, 2, 0.0, 1.0, 101);
  cfg.beta = BetaProfile::indicator(10.0, 0.0, 1.0);
  const GammaScan s10 = gamma_scan(cfg, 2, 0.0, 1.0, 101);
  ASSERT_EQ(s1.roots.size(), s10.roots.size());
  for (std::size_t i = 0; i < s1.roots.size(); ++i) {
    EXPECT_NEAR(s1.roots[i].b, s10.roots[i].b, 1e-9);
  }
}

TEST(GammaScan, CsvLayout) {
  const GammaScan scan = gamma_scan(gamma_root(1.0), 2, 0.0, 1.0, 11);
  std::ostringstream os;
  write_gamma_scan_csv(os, scan);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "b,gamma,is_root");
  int rows = 0, roots = 0;
  while (std::getline(is, line)) {
    ++rows;
    if (line.back() == '1') ++roots;
  }
  EXPECT_EQ(rows, 11);
  EXPECT_EQ(roots, 1);
}

TEST(InputCoeffs, UncoupledParabolicModesAreUnreachable) {
  PlantConfig cfg = benchmark();
  cfg.beta = BetaProfile::constant(0.0);
  const Quadrature q = default_quadrature(cfg, 4);
  for (int n = 1; n <= 4; ++n) {
    const auto ic = input_coeffs(cfg, eigen_pair(cfg, ModeIndex::parabolic(n), q), q);
    EXPECT_EQ(ic.a, cplx(0.0));
    EXPECT_EQ(ic.b, cplx(0.0));
  }
}

TEST(InputCoeffs, BoundaryValueIdentity) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 20);
  std::vector<ModeIndex> modes;
  for (int n = 1; n <= 20; ++n) modes.push_back(ModeIndex::parabolic(n));
  for (int m = -20; m <= 20; ++m) modes.push_back(ModeIndex::hyperbolic(m));
  for (const auto& idx : modes) {
    const EigenPair p = normalize_pair(eigen_pair(cfg, idx, q), q);
    const auto ic = input_coeffs(cfg, p, q);
    EXPECT_EQ(ic.beta_coeff, ic.a + p.lambda * ic.b);
    EXPECT_LE(std::abs(ic.beta_coeff - ic.psi3_L_conj), 1e-8 * (1.0 + std::abs(ic.psi3_L_conj)))
        << idx.label();
  }
}

TEST(InputCoeffs, BoundaryShortcutForFirstHeatMode) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 1);
  const EigenPair p = normalize_pair(eigen_pair(cfg, ModeIndex::parabolic(1), q), q);
  const auto ic = input_coeffs(cfg, p, q);
  const FieldValue end = p.psi(cfg.L);
  // ψ²(0) = 0, and ψ³ = −(ψ²)''/λ integrated by parts.
  const cplx a_fb = std::conj(end.f2) / (cfg.alpha * cfg.L);
  const cplx b_fb = std::conj(cfg.L * end.f2_x - end.f2) / (cfg.alpha * cfg.L * std::conj(p.lambda));
  EXPECT_LT(std::abs(ic.a - a_fb), 1e-9);
  EXPECT_LT(std::abs(ic.b - b_fb), 1e-9);
}

TEST(InputCoeffs, HyperbolicClosedForms) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 12);
  for (int m : {-12, -1, 0, 3, 12}) {
    const auto ic = input_coeffs(cfg, eigen_pair(cfg, ModeIndex::hyperbolic(m), q), q);
    EXPECT_LT(std::abs(ic.a - hyperbolic_a_closed(cfg, m)), 1e-10 * std::abs(ic.a));
    EXPECT_LT(std::abs(ic.b - hyperbolic_b_closed(cfg, m)), 1e-10 * std::abs(ic.b));
  }
}

TEST(MeasurementCoeffs, PointwiseDirichlet) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 2);
  const auto c2 = measurement_coeffs(cfg, MeasurementSpec::dirichlet(0.5),
                                     eigenvector(cfg, ModeIndex::parabolic(2), q), q);
  EXPECT_NEAR(std::abs(c2.c), 0.0, 1e-15);
  const auto c1 = measurement_coeffs(cfg, MeasurementSpec::dirichlet(std::sqrt(3.0) / 2),
                                     eigenvector(cfg, ModeIndex::parabolic(1), q), q);
  EXPECT_NEAR(c1.c.real(), std::sqrt(2.0) * std::sin(pi * std::sqrt(3.0) / 2), 1e-14);
  EXPECT_NEAR(c1.c.real(), 0.578, 1e-3);
  EXPECT_EQ(c1.c.imag(), 0.0);
}

TEST(MeasurementCoeffs, NeumannParabolicIsAnalyticDerivative) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 3);
  const auto c = measurement_coeffs(cfg, MeasurementSpec::neumann(0.3),
                                    eigenvector(cfg, ModeIndex::parabolic(3), q), q);
  EXPECT_NEAR(c.c.real(), std::sqrt(2.0) * 3 * pi * std::cos(0.9 * pi), 1e-13);
}

TEST(MeasurementCoeffs, DistributedSineWeightSelectsOneMode) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 8);
  const auto spec =
      MeasurementSpec::distributed([](double x) { return std::sqrt(2.0) * std::sin(3 * pi * x); });
  for (int n = 1; n <= 8; ++n) {
    const auto c = measurement_coeffs(cfg, spec, eigenvector(cfg, ModeIndex::parabolic(n), q), q);
    EXPECT_NEAR(c.c.real(), n == 3 ? 1.0 : 0.0, 1e-13);
    EXPECT_EQ(c.c.imag(), 0.0);
  }
}

TEST(MeasurementCoeffs, RejectsPointOutsideDomain) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 1);
  EXPECT_THROW(measurement_coeffs(cfg, MeasurementSpec::dirichlet(1.5),
                                  eigenvector(cfg, ModeIndex::parabolic(1), q), q),
               ConfigError);
}

TEST(MeasurementCoeffs, HyperbolicDecay) {
  const PlantConfig cfg = benchmark();
  const Quadrature q = default_quadrature(cfg, 64);
  const std::vector<int> ms = {8, 12, 16, 24, 32, 48, 64};
  struct Variant {
    MeasurementSpec spec;
    double bound;
  };
  const std::vector<Variant> variants = {
      {MeasurementSpec::distributed([](double x) { return 1.0 + x; }), -1.8},
      {MeasurementSpec::dirichlet(std::sqrt(3.0) / 2), -1.8},
      {MeasurementSpec::neumann(std::sqrt(3.0) / 2), -1.3}};
  for (const auto& v : variants) {
    std::vector<double> xs, ys;
    for (int m : ms) {
      const auto c = measurement_coeffs(cfg, v.spec, eigenvector(cfg, ModeIndex::hyperbolic(m), q), q);
      xs.push_back(m);
      ys.push_back(std::abs(c.c));
    }
    EXPECT_LE(oracle::loglog_slope(xs, ys), v.bound) << v.spec.describe();
  }
}

TEST(TailSums, UncoupledParabolicPartVanishes) {
  PlantConfig cfg = benchmark();
  cfg.beta = BetaProfile::constant(0.0);
  const TailTable table(cfg, MeasurementSpec::dirichlet(std::sqrt(3.0) / 2), 128);
  for (double t : table.parabolic_a()) EXPECT_EQ(t, 0.0);
  for (double t : table.parabolic_b()) EXPECT_EQ(t, 0.0);
  const TailSums s = table.sums(2, 8);
  EXPECT_GT(s.S_a, 0.0);  // hyperbolic coefficients are still present
  EXPECT_EQ(s.S_c2, 0.0);
}

TEST(TailSums, ShrinkWithTruncation) {
  const PlantConfig cfg = benchmark();
  const TailTable table(cfg, MeasurementSpec::dirichlet(std::sqrt(3.0) / 2));
  const TailSums lo = table.sums(2, 8), hi = table.sums(4, 16);
  EXPECT_LT(hi.S_a, lo.S_a);
  EXPECT_LT(hi.S_b, lo.S_b);
  EXPECT_LT(hi.S_c1, lo.S_c1);
  EXPECT_LT(hi.S_c2, lo.S_c2);
  EXPECT_FALSE(lo.flagged) << (lo.flags.empty() ? "" : lo.flags.front());
  for (double v : {lo.S_a, lo.S_b, lo.S_c1, lo.S_c2}) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
  }
}

TEST(TailSums, CutoffDoublingStaysWithinRemainder) {
  const PlantConfig cfg = benchmark();
  for (const auto& spec : {MeasurementSpec::dirichlet(std::sqrt(3.0) / 2),
                           MeasurementSpec::neumann(std::sqrt(3.0) / 2)}) {
    const TailSums k1 = tail_sums(cfg, spec, 2, 8, 256);
    const TailSums k2 = tail_sums(cfg, spec, 2, 8, 512);
    EXPECT_LE(k2.partial_a - k1.partial_a, k1.rem_a);
    EXPECT_LE(k2.partial_b - k1.partial_b, k1.rem_b);
    EXPECT_LE(k2.partial_c1 - k1.partial_c1, k1.rem_c1);
    EXPECT_LE(k2.partial_c2 - k1.partial_c2, k1.rem_c2);
    // The estimate is not wildly pessimistic either.
    EXPECT_GE(k2.partial_a - k1.partial_a, 0.4 * k1.rem_a);
  }
}

TEST(TailSums, DirectRecomputationAgrees) {
  // The boundary forms used for the tails against direct quadrature.
  const PlantConfig cfg = benchmark();
  const TailTable table(cfg, MeasurementSpec::dirichlet(0.3), 64);
  for (int n : {3, 7, 15, 30}) {
    const Quadrature q = default_quadrature(cfg, n);
    const auto ic = input_coeffs(cfg, eigen_pair(cfg, ModeIndex::parabolic(n), q), q);
    EXPECT_NEAR(table.parabolic_a()[n], std::norm(ic.a), 1e-9 * std::norm(ic.a) + 1e-30) << n;
    EXPECT_NEAR(table.parabolic_b()[n], std::norm(ic.b), 1e-9 * std::norm(ic.b) + 1e-30) << n;
  }
  for (int m : {3, 20}) {
    const Quadrature q = default_quadrature(cfg, m);
    const auto cp = measurement_coeffs(cfg, MeasurementSpec::dirichlet(0.3),
                                       eigenvector(cfg, ModeIndex::hyperbolic(m), q), q);
    const auto cm = measurement_coeffs(cfg, MeasurementSpec::dirichlet(0.3),
                                       eigenvector(cfg, ModeIndex::hyperbolic(-m), q), q);
    EXPECT_NEAR(table.hyperbolic_c()[m], std::norm(cp.c) + std::norm(cm.c),
                1e-10 * table.hyperbolic_c()[m]);
  }
}

TEST(TailSums, CutoffMustExceedTruncation) {
  const TailTable table(benchmark(), MeasurementSpec::dirichlet(0.5), 64);
  EXPECT_THROW(table.sums(60, 3), ConfigError);
}

TEST(TailRemainderFit, PowerLawAndFailureModes) {
  std::vector<double> t(513, 0.0);
  for (int k = 1; k <= 512; ++k) t[k] = 3.0 / (static_cast<double>(k) * k);
  const auto r = tail_remainder(t, "test");
  double exact = 0.0;
  for (int k = 513; k < 20000000; ++k) exact += 3.0 / (static_cast<double>(k) * k);
  EXPECT_NEAR(r.value, exact, 1e-3 * exact);
  EXPECT_FALSE(r.flagged);

  for (int k = 1; k <= 512; ++k) t[k] = 1.0 / std::sqrt(k);
  const auto slow = tail_remainder(t, "slow");
  EXPECT_TRUE(std::isinf(slow.value));
  EXPECT_TRUE(slow.flagged);

  for (int k = 1; k <= 512; ++k) t[k] = 1.0 + 0.01 * k;
  EXPECT_THROW(tail_remainder(t, "growing"), DivergingTailError);

  std::fill(t.begin(), t.end(), 0.0);
  EXPECT_EQ(tail_remainder(t, "zero").value, 0.0);
}
