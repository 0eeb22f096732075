#include "wavecascade/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace wavecascade {

namespace {

constexpr double kPi = std::numbers::pi;

// Exponent beyond which exp(−t) underflows to zero.
constexpr double kUnderflow = 745.0;

double unscale(double scaled, double log_scale) {
  if (scaled == 0.0) return 0.0;
  const double lg = std::log(std::abs(scaled)) + log_scale;
  if (lg > 709.0) return std::copysign(std::numeric_limits<double>::infinity(), scaled);
  return scaled * std::exp(log_scale);
}

// Parabolic parameters shared by the γ and input-coefficient routines.
struct ParabolicMode {
  double k, lambda, nu, sgn, kappa;
  bool zero;
  ParabolicMode(const PlantConfig& cfg, int n)
      : k(n * kPi / cfg.L), lambda(cfg.c - k * k), nu(std::abs(lambda)),
        sgn(lambda >= 0.0 ? 1.0 : -1.0), kappa(std::sqrt(2.0 / cfg.L)),
        zero(std::abs(lambda) < cfg.tol_zero()) {}
};

// ∫₀ᴸ g(s)·sinh(λs)·e^{−|λ|L} ds, written with decaying exponentials only.
template <class G>
double scaled_sinh_moment(const Quadrature& quad, const ParabolicMode& pm, G&& g) {
  const auto& e = quad.edges();
  const double L = quad.length();
  double acc = 0.0;
  for (std::size_t p = 0; p + 1 < e.size(); ++p) {
    const double a = e[p], b = e[p + 1];
    const double lead = pm.nu * (L - b);
    if (lead > kUnderflow) continue;
    const cplx part = integrate_toward(
        quad.rule(),
        [&](double s) { return -pm.sgn * 0.5 * std::expm1(-2.0 * pm.nu * s) * g(s); }, a, b,
        pm.nu, b - a);
    acc += std::exp(-lead) * part.real();
  }
  return acc;
}

Quadrature mode_quadrature(const PlantConfig& cfg, int index, int order) {
  return Quadrature(cfg.L, Quadrature::default_panels(index), order, cfg.beta.breakpoints());
}

// Adds panel edges at distances j/ν from both ends so boundary layers of
// width 1/ν are resolved.
Quadrature refine_ends(const Quadrature& quad, double nu, const std::vector<double>& extra) {
  const double L = quad.length();
  std::vector<double> bp = extra;
  if (nu * quad.max_panel_width() > 1.0) {
    for (int j = 1; j <= 40; ++j) {
      const double t = j / nu;
      if (t >= 0.5 * L) break;
      bp.push_back(t);
      bp.push_back(L - t);
    }
  }
  for (double x : quad.edges()) bp.push_back(x);
  return Quadrature(L, 1, quad.order(), bp);
}

}  // namespace

GammaCoefficient gamma(const PlantConfig& cfg, int n, const Quadrature& quad) {
  if (n < 1) throw ConfigError("gamma: parabolic index must be >= 1");
  const ParabolicMode pm(cfg, n);
  GammaCoefficient g;
  g.n = n;
  if (pm.zero) {
    g.branch = GammaCoefficient::Branch::ZeroEigenvalue;
    g.scaled = quad.integrate([&](double s) { return s * cfg.beta(s) * std::sin(pm.k * s); });
    g.magnitude =
        quad.integrate([&](double s) { return std::abs(s * cfg.beta(s) * std::sin(pm.k * s)); });
    g.value = g.scaled;
    return g;
  }
  g.scaled = scaled_sinh_moment(quad, pm, [&](double s) { return cfg.beta(s) * std::sin(pm.k * s); });
  g.magnitude = std::abs(scaled_sinh_moment(
      quad, pm, [&](double s) { return pm.sgn * std::abs(cfg.beta(s) * std::sin(pm.k * s)); }));
  g.log_scale = pm.nu * cfg.L;
  g.value = unscale(g.scaled, g.log_scale);
  return g;
}

GammaCoefficient gamma(const PlantConfig& cfg, int n) {
  return gamma(cfg, n, mode_quadrature(cfg, n, 32));
}

GammaCoefficient gamma_closed_form_indicator(const PlantConfig& cfg, int n) {
  if (cfg.beta.kind() != BetaProfile::Kind::Indicator) {
    throw ConfigError("closed-form gamma requires an indicator beta profile, got " +
                      cfg.beta.describe());
  }
  if (n < 1) throw ConfigError("gamma: parabolic index must be >= 1");
  const double b0 = cfg.beta.beta0(), a = cfg.beta.a(), b = cfg.beta.b(), L = cfg.L;
  if (b < a) throw ConfigError("indicator support must satisfy a <= b");
  const ParabolicMode pm(cfg, n);
  GammaCoefficient g;
  g.n = n;
  if (pm.zero) {
    g.branch = GammaCoefficient::Branch::ZeroEigenvalue;
    if (b == a) return g;
    const double k = pm.k;
    g.scaled = -b0 * L / (n * kPi) * (b * std::cos(k * b) - a * std::cos(k * a)) +
               b0 * L * L / (n * n * kPi * kPi) * (std::sin(k * b) - std::sin(k * a));
    g.value = g.scaled;
    g.magnitude = std::abs(b0) * 0.5 * (b * b - a * a);
    return g;
  }
  g.log_scale = pm.nu * L;
  if (b == a) return g;
  // sinh(λs)·e^{−|λ|L} and cosh(λs)·e^{−|λ|L}.
  auto sh = [&](double s) {
    return pm.sgn * 0.5 * (std::exp(-pm.nu * (L - s)) - std::exp(-pm.nu * (L + s)));
  };
  auto ch = [&](double s) {
    return 0.5 * (std::exp(-pm.nu * (L - s)) + std::exp(-pm.nu * (L + s)));
  };
  auto F = [&](double s) {
    return -pm.k * sh(s) * std::cos(pm.k * s) + pm.lambda * ch(s) * std::sin(pm.k * s);
  };
  g.scaled = b0 / (pm.lambda * pm.lambda + pm.k * pm.k) * (F(b) - F(a));
  g.value = unscale(g.scaled, g.log_scale);
  g.magnitude = std::abs(b0) * (ch(b) - ch(a)) / pm.nu;
  return g;
}

GammaScan gamma_scan(const PlantConfig& cfg, int n, double b_lo, double b_hi, int samples) {
  if (samples < 2) throw ConfigError("gamma_scan needs at least two samples");
  if (cfg.beta.kind() != BetaProfile::Kind::Indicator) {
    throw ConfigError("gamma_scan requires an indicator beta profile");
  }
  const double a = cfg.beta.a(), b0 = cfg.beta.beta0();
  PlantConfig work = cfg;
  auto eval = [&](double b) {
    work.beta = BetaProfile::indicator(b0, a, b);
    return gamma_closed_form_indicator(work, n);
  };
  GammaScan scan;
  scan.n = n;
  std::vector<double> signs;
  for (int i = 0; i < samples; ++i) {
    const double b = b_lo + (b_hi - b_lo) * i / (samples - 1);
    if (b <= a) continue;
    const GammaCoefficient g = eval(b);
    scan.b.push_back(b);
    scan.gamma.push_back(g.value);
    signs.push_back(g.scaled);
  }
  constexpr double kRootTol = 1e-10;
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i] == 0.0) {
      scan.roots.push_back({scan.b[i], 0.0, true});
      continue;
    }
    if (i + 1 >= signs.size() || signs[i + 1] == 0.0 || (signs[i] > 0) == (signs[i + 1] > 0)) {
      continue;
    }
    double lo = scan.b[i], hi = scan.b[i + 1];
    double flo = signs[i];
    GammaRoot root;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const GammaCoefficient g = eval(mid);
      root.b = mid;
      root.gamma = g.value;
      if (std::abs(g.value) < kRootTol) {
        root.converged = true;
        break;
      }
      if (std::nextafter(lo, hi) >= hi || mid <= lo || mid >= hi) {
        root.converged = true;
        root.resolution_limited = true;
        break;
      }
      if ((g.scaled > 0) == (flo > 0)) {
        lo = mid;
        flo = g.scaled;
      } else {
        hi = mid;
      }
    }
    scan.roots.push_back(root);
  }
  return scan;
}

void write_gamma_scan_csv(std::ostream& os, const GammaScan& scan) {
  struct Row {
    double b, g;
    bool root;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < scan.b.size(); ++i) rows.push_back({scan.b[i], scan.gamma[i], false});
  for (const auto& r : scan.roots) rows.push_back({r.b, r.gamma, true});
  std::stable_sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) { return x.b < y.b; });
  const auto old = os.precision(17);
  os << "b,gamma,is_root\n";
  for (const auto& r : rows) os << r.b << ',' << r.g << ',' << (r.root ? 1 : 0) << '\n';
  os.precision(old);
}

ModalInputCoeffs input_coeffs(const PlantConfig& cfg, const EigenPair& pair,
                              const Quadrature& quad) {
  const double nu = pair.index.is_parabolic() ? std::abs(pair.lambda.real()) : 0.0;
  const Quadrature q = refine_ends(quad, nu, cfg.beta.breakpoints());
  const auto psi = pair.psi_at(q.nodes());
  const double aL = cfg.alpha * cfg.L;
  cplx a(0.0), b(0.0);
  for (std::size_t i = 0; i < psi.size(); ++i) {
    a += q.weights()[i] * std::conj(psi[i].f2_x);
    b -= q.weights()[i] * q.nodes()[i] * std::conj(psi[i].f3);
  }
  ModalInputCoeffs out;
  out.index = pair.index;
  out.a = a / aL;
  out.b = b / aL;
  out.beta_coeff = out.a + pair.lambda * out.b;
  out.psi3_L_conj = std::conj(pair.psi(cfg.L).f3);
  return out;
}

MeasurementSpec MeasurementSpec::distributed(std::function<double(double)> w, std::string text) {
  MeasurementSpec s;
  s.kind = Kind::Distributed;
  s.weight = std::move(w);
  s.weight_text = std::move(text);
  return s;
}

MeasurementSpec MeasurementSpec::dirichlet(double xi) {
  MeasurementSpec s;
  s.kind = Kind::Dirichlet;
  s.xi = xi;
  return s;
}

MeasurementSpec MeasurementSpec::neumann(double xi) {
  MeasurementSpec s;
  s.kind = Kind::Neumann;
  s.xi = xi;
  return s;
}

double MeasurementSpec::kappa() const {
  switch (kind) {
    case Kind::Distributed:
      return 0.0;
    case Kind::Dirichlet:
      return 1.0;
    case Kind::Neumann:
      return 1.75;
  }
  return 0.0;
}

std::string MeasurementSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::Distributed:
      os << "distributed(" << (weight_text.empty() ? "c_o" : weight_text) << ")";
      break;
    case Kind::Dirichlet:
      os << "dirichlet(" << xi << ")";
      break;
    case Kind::Neumann:
      os << "neumann(" << xi << ")";
      break;
  }
  return os.str();
}

void MeasurementSpec::validate(const PlantConfig& cfg) const {
  if (kind == Kind::Distributed) {
    if (!weight) throw ConfigError("distributed measurement needs a weight function");
    return;
  }
  if (!(xi >= 0.0 && xi <= cfg.L)) {
    throw ConfigError("measurement point xi must lie in [0, L]");
  }
}

MeasurementCoeffs measurement_coeffs(const PlantConfig& cfg, const MeasurementSpec& spec,
                                     const EigenPair& pair, const Quadrature& quad) {
  spec.validate(cfg);
  MeasurementCoeffs out;
  out.index = pair.index;
  switch (spec.kind) {
    case MeasurementSpec::Kind::Distributed: {
      const auto phi = pair.phi_at(quad.nodes());
      cplx acc(0.0);
      for (std::size_t i = 0; i < phi.size(); ++i) {
        acc += quad.weights()[i] * spec.weight(quad.nodes()[i]) * phi[i].f1;
      }
      out.c = acc;
      break;
    }
    case MeasurementSpec::Kind::Dirichlet:
      out.c = pair.phi(spec.xi).f1;
      break;
    case MeasurementSpec::Kind::Neumann:
      out.c = pair.phi(spec.xi).f1_x;
      break;
  }
  return out;
}

cplx hyperbolic_a_closed(const PlantConfig& cfg, int m) {
  const cplx lam = eigenvalue(cfg, ModeIndex::hyperbolic(m));
  const double L = cfg.L;
  const double mu = cfg.mu();
  const double A = std::sqrt((mu * mu * L * L + m * m * kPi * kPi) * std::sinh(2.0 * mu * L)) /
                   (L * std::sqrt(2.0 * mu));
  return A * std::sinh(lam * L) / (cfg.alpha * L * L * lam * lam);
}

cplx hyperbolic_b_closed(const PlantConfig& cfg, int m) {
  const cplx lam = eigenvalue(cfg, ModeIndex::hyperbolic(m));
  const double L = cfg.L;
  const double mu = cfg.mu();
  const double A = std::sqrt((mu * mu * L * L + m * m * kPi * kPi) * std::sinh(2.0 * mu * L)) /
                   (L * std::sqrt(2.0 * mu));
  return A / (cfg.alpha * L * L * lam) *
         (L * std::cosh(lam * L) / lam - std::sinh(lam * L) / (lam * lam));
}

TailTable::TailTable(const PlantConfig& cfg, const MeasurementSpec& spec, int cutoff)
    : cutoff_(cutoff) {
  spec.validate(cfg);
  if (cutoff < 40) throw ConfigError("tail cutoff must be at least 40");
  const std::size_t n1 = static_cast<std::size_t>(cutoff) + 1;
  pa_.assign(n1, 0.0);
  pb_.assign(n1, 0.0);
  pc_.assign(n1, 0.0);
  ha_.assign(n1, 0.0);
  hb_.assign(n1, 0.0);
  hc_.assign(n1, 0.0);
  const double L = cfg.L, aL = cfg.alpha * cfg.L;
  const bool beta_zero = cfg.beta.is_zero();

  for (int n = 1; n <= cutoff; ++n) {
    const ParabolicMode pm(cfg, n);
    const Quadrature q = mode_quadrature(cfg, n, 8);
    // Boundary forms of a = ⟨(0, x/αL, 0), ψ⟩ and b = ⟨(0, 0, −x/αL), ψ⟩.
    if (!beta_zero) {
      auto f = [&](double s) { return cfg.beta(s) * std::sin(pm.k * s); };
      const double P_L = q.integrate([&](double s) { return s * f(s); });
      double a = 0.0, b = 0.0;
      if (pm.zero) {
        a = P_L * pm.kappa;
        const double xP = q.integrate([&](double s) {
          return f(s) * (s * L * L / 2.0 - s * s * s / 6.0);
        });
        b = -pm.kappa * xP / aL;
      } else {
        const double a1 = pm.sgn > 0 ? 1.0 + cfg.alpha : 1.0 - cfg.alpha;
        const double a2 = pm.sgn > 0 ? 1.0 - cfg.alpha : 1.0 + cfg.alpha;
        const double den = a1 + a2 * std::exp(-2.0 * pm.nu * L);
        const double g_scaled = gamma(cfg, n, q).scaled;
        const double hL = 2.0 * pm.kappa * g_scaled / (pm.lambda * den);
        const double psi2_L = (pm.kappa * P_L - hL) / pm.lambda;
        a = psi2_L / aL;
        const double xh =
            (-(cfg.alpha * pm.lambda * L + 1.0) * hL + pm.kappa * P_L) / (pm.lambda * pm.lambda);
        b = -xh / aL;
      }
      pa_[n] = a * a;
      pb_[n] = b * b;
    }
    double c = 0.0;
    switch (spec.kind) {
      case MeasurementSpec::Kind::Distributed: {
        c = q.integrate([&](double s) { return spec.weight(s) * pm.kappa * std::sin(pm.k * s); });
        pc_[n] = c * c;
        break;
      }
      case MeasurementSpec::Kind::Dirichlet:
        c = pm.kappa * std::sin(pm.k * spec.xi);
        pc_[n] = c * c / (static_cast<double>(n) * n);
        break;
      case MeasurementSpec::Kind::Neumann:
        c = pm.kappa * pm.k * std::cos(pm.k * spec.xi);
        pc_[n] = c * c / std::pow(static_cast<double>(n), 3.5);
        break;
    }
  }

  for (int m = 1; m <= cutoff; ++m) {
    ha_[m] = std::norm(hyperbolic_a_closed(cfg, m)) + std::norm(hyperbolic_a_closed(cfg, -m));
    hb_[m] = std::norm(hyperbolic_b_closed(cfg, m)) + std::norm(hyperbolic_b_closed(cfg, -m));
    if (beta_zero) continue;
    // φ₂,₋ₘ = conj(φ₂,ₘ) for real β, so both signs share one evaluation.
    const Quadrature q = mode_quadrature(cfg, m, 8);
    const EigenPair p = eigenvector(cfg, ModeIndex::hyperbolic(m), q);
    hc_[m] = 2.0 * std::norm(measurement_coeffs(cfg, spec, p, q).c);
  }

  auto suffix = [&](const std::vector<double>& t) {
    std::vector<double> s(n1 + 1, 0.0);
    for (std::size_t k = n1; k-- > 0;) s[k] = s[k + 1] + t[k];
    return s;
  };
  spa_ = suffix(pa_);
  spb_ = suffix(pb_);
  spc_ = suffix(pc_);
  sha_ = suffix(ha_);
  shb_ = suffix(hb_);
  shc_ = suffix(hc_);
  ra_p_ = tail_remainder(pa_, "parabolic |a|^2");
  rb_p_ = tail_remainder(pb_, "parabolic |b|^2");
  rc_p_ = tail_remainder(pc_, "parabolic measurement");
  ra_h_ = tail_remainder(ha_, "hyperbolic |a|^2");
  rb_h_ = tail_remainder(hb_, "hyperbolic |b|^2");
  rc_h_ = tail_remainder(hc_, "hyperbolic measurement");
}

TailRemainder tail_remainder(const std::vector<double>& terms, const std::string& name) {
  // The exponent comes from geometric bins over the last decade of indices;
  // 32 terms alone span too short a log-range to pin it for oscillating
  // sequences. The amplitude then matches the mass of the last 32 terms.
  const int K = static_cast<int>(terms.size()) - 1;
  constexpr int kWindow = 32, kBins = 12;
  if (K < kWindow) throw ConfigError("tail remainder needs at least 32 terms");
  const int lo = std::max(1, K / 10);
  std::vector<double> lx, ly;
  int from = lo;
  for (int bin = 1; bin <= kBins && from <= K; ++bin) {
    int to = static_cast<int>(std::floor(lo * std::pow(static_cast<double>(K) / lo,
                                                       static_cast<double>(bin) / kBins)));
    to = std::min(K, std::max(to, from + 3));  // at least four terms per bin
    if (bin == kBins || K - to < 4) to = K;
    double mean = 0.0, centre = 0.0;
    for (int k = from; k <= to; ++k) {
      mean += terms[k];
      centre += k;
    }
    const int count = to - from + 1;
    mean /= count;
    centre /= count;
    if (mean > 0.0) {
      lx.push_back(std::log(centre));
      ly.push_back(std::log(mean));
    }
    from = to + 1;
  }
  TailRemainder r;
  if (lx.size() < 3) {
    const bool all_zero = std::all_of(terms.end() - kWindow, terms.end(),
                                      [](double t) { return t == 0.0; });
    if (!all_zero) {
      r.flagged = true;
      r.note = name + ": too few nonzero terms to fit a remainder";
    }
    return r;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(lx.size());
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double p = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (p >= 0.0) {
    std::ostringstream os;
    os << name << ": tail terms do not decay (fitted exponent " << p << ")";
    throw DivergingTailError(os.str());
  }
  if (p >= -1.0) {
    r.value = std::numeric_limits<double>::infinity();
    r.flagged = true;
    std::ostringstream os;
    os << name << ": fitted exponent " << p << " gives a non-summable tail";
    r.note = os.str();
    return r;
  }
  double mass = 0.0, law = 0.0;
  for (int k = K - kWindow + 1; k <= K; ++k) {
    mass += terms[k];
    law += std::pow(static_cast<double>(k), p);
  }
  r.value = mass / law * std::pow(K + 0.5, p + 1.0) / (-p - 1.0);
  return r;
}

TailSums TailTable::sums(int N, int M) const {
  if (N < 0 || M < 0) throw ConfigError("truncation indices must be nonnegative");
  if (cutoff_ <= std::max(N, M) + 10) {
    throw ConfigError("tail cutoff must exceed max(N, M) + 10");
  }
  TailSums t;
  t.N = N;
  t.M = M;
  t.cutoff = cutoff_;
  t.partial_a = spa_[N + 1] + sha_[M + 1];
  t.partial_b = spb_[N + 1] + shb_[M + 1];
  t.partial_c1 = spc_[N + 1];
  t.partial_c2 = shc_[M + 1];
  t.rem_a = ra_p_.value + ra_h_.value;
  t.rem_b = rb_p_.value + rb_h_.value;
  t.rem_c1 = rc_p_.value;
  t.rem_c2 = rc_h_.value;
  t.S_a = t.partial_a + t.rem_a;
  t.S_b = t.partial_b + t.rem_b;
  t.S_c1 = t.partial_c1 + t.rem_c1;
  t.S_c2 = t.partial_c2 + t.rem_c2;
  for (const TailRemainder* r : {&ra_p_, &rb_p_, &rc_p_, &ra_h_, &rb_h_, &rc_h_}) {
    if (r->flagged) t.flags.push_back(r->note);
  }
  auto check = [&](const char* name, double partial, double rem) {
    if (partial > 0.0 && rem > 0.1 * partial) {
      std::ostringstream os;
      os << name << ": remainder " << rem << " exceeds 10% of the partial sum " << partial;
      t.flags.push_back(os.str());
    }
  };
  check("S_a", t.partial_a, t.rem_a);
  check("S_b", t.partial_b, t.rem_b);
  check("S_c1", t.partial_c1, t.rem_c1);
  check("S_c2", t.partial_c2, t.rem_c2);
  t.flagged = !t.flags.empty();
  return t;
}

TailSums tail_sums(const PlantConfig& cfg, const MeasurementSpec& spec, int N, int M,
                   int cutoff) {
  return TailTable(cfg, spec, cutoff).sums(N, M);
}

}  // namespace wavecascade
