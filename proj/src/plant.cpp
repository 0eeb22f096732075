#include "wavecascade/plant.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "wavecascade/errors.hpp"

namespace wavecascade {

BetaProfile BetaProfile::constant(double beta0) {
  BetaProfile p;
  p.kind_ = Kind::Constant;
  p.beta0_ = beta0;
  return p;
}

BetaProfile BetaProfile::indicator(double beta0, double a, double b) {
  BetaProfile p;
  p.kind_ = Kind::Indicator;
  p.beta0_ = beta0;
  p.a_ = a;
  p.b_ = b;
  return p;
}

BetaProfile BetaProfile::polynomial(std::vector<double> coeffs) {
  BetaProfile p;
  p.kind_ = Kind::Polynomial;
  p.coeffs_ = std::move(coeffs);
  return p;
}

BetaProfile BetaProfile::tabulated(std::vector<double> xs, std::vector<double> values) {
  if (xs.size() != values.size() || xs.size() < 2) {
    throw ConfigError("tabulated beta needs at least two (x, value) pairs of equal length");
  }
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) throw ConfigError("tabulated beta grid must be strictly increasing");
  }
  BetaProfile p;
  p.kind_ = Kind::Tabulated;
  p.xs_ = std::move(xs);
  p.values_ = std::move(values);
  return p;
}

BetaProfile BetaProfile::tabulated_uniform(double L, std::vector<double> values) {
  std::vector<double> xs(values.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = values.size() > 1 ? L * static_cast<double>(i) / (values.size() - 1) : 0.0;
  }
  return tabulated(std::move(xs), std::move(values));
}

double BetaProfile::operator()(double x) const {
  switch (kind_) {
    case Kind::Constant:
      return beta0_;
    case Kind::Indicator:
      return (x >= a_ && x <= b_) ? beta0_ : 0.0;
    case Kind::Polynomial: {
      double acc = 0.0;
      for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
      return acc;
    }
    case Kind::Tabulated: {
      if (x <= xs_.front()) return values_.front();
      if (x >= xs_.back()) return values_.back();
      auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
      const std::size_t i = static_cast<std::size_t>(it - xs_.begin());
      const double t = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
      return (1.0 - t) * values_[i - 1] + t * values_[i];
    }
  }
  return 0.0;
}

std::vector<double> BetaProfile::breakpoints() const {
  switch (kind_) {
    case Kind::Indicator:
      return {a_, b_};
    case Kind::Tabulated:
      return xs_;
    default:
      return {};
  }
}

bool BetaProfile::is_zero() const {
  switch (kind_) {
    case Kind::Constant:
      return beta0_ == 0.0;
    case Kind::Indicator:
      return beta0_ == 0.0 || !(b_ > a_);
    case Kind::Polynomial:
      return std::all_of(coeffs_.begin(), coeffs_.end(), [](double v) { return v == 0.0; });
    case Kind::Tabulated:
      return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
  }
  return false;
}

BetaProfile BetaProfile::scaled(double s) const {
  BetaProfile p = *this;
  p.beta0_ *= s;
  for (double& v : p.coeffs_) v *= s;
  for (double& v : p.values_) v *= s;
  return p;
}

std::string BetaProfile::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::Constant:
      os << "constant(" << beta0_ << ")";
      break;
    case Kind::Indicator:
      os << "indicator(" << beta0_ << ", [" << a_ << ", " << b_ << "])";
      break;
    case Kind::Polynomial:
      os << "polynomial(";
      for (std::size_t i = 0; i < coeffs_.size(); ++i) os << (i ? " " : "") << coeffs_[i];
      os << ")";
      break;
    case Kind::Tabulated:
      os << "tabulated(" << xs_.size() << " points)";
      break;
  }
  return os.str();
}

double PlantConfig::rho() const { return std::log((alpha - 1.0) / (alpha + 1.0)) / (2.0 * L); }

double PlantConfig::tol_zero() const { return 1e-9 * std::max(1.0, std::abs(c)); }

double default_tol_alpha(const PlantConfig& cfg) { return 1e-9 * std::max(1.0, std::abs(cfg.c)); }

ValidationReport validate_config(const PlantConfig& cfg, double tol_alpha) {
  if (!(cfg.alpha > 1.0)) {
    std::ostringstream os;
    os << "alpha = " << cfg.alpha << " is not > 1; only the alpha > 1 damping regime is supported";
    throw ConfigError(os.str());
  }
  ValidationReport rep;
  auto fail = [&](const std::string& msg) {
    rep.ok = false;
    rep.violations.push_back(msg);
  };
  if (!(cfg.L > 0.0)) fail("L must be positive");
  if (!(cfg.delta > 0.0)) fail("delta must be positive");
  if (!std::isfinite(cfg.c)) fail("c must be finite");
  const BetaProfile& b = cfg.beta;
  if (b.kind() == BetaProfile::Kind::Indicator) {
    if (!(b.a() >= 0.0 && b.a() < b.b() && b.b() <= cfg.L)) fail("indicator beta needs 0 <= a < b <= L");
    if (b.beta0() == 0.0) fail("indicator beta needs beta0 != 0");
  }
  if (b.kind() == BetaProfile::Kind::Tabulated) {
    if (b.grid().front() > 0.0 || b.grid().back() < cfg.L) fail("tabulated beta grid must cover [0, L]");
  }
  if (!rep.ok) return rep;

  const double rho = cfg.rho();
  const double pi2 = std::numbers::pi * std::numbers::pi / (cfg.L * cfg.L);
  const double top = std::max(0.0, cfg.c - rho + tol_alpha);
  const int n_max = static_cast<int>(std::ceil(std::sqrt(top / pi2))) + 1;
  for (int n = 1; n <= n_max; ++n) {
    if (std::abs(cfg.c - rho - n * n * pi2) < tol_alpha) {
      rep.alpha_condition_failures.push_back(n);
      std::ostringstream os;
      os.precision(17);
      os << "alpha-condition fails at n = " << n << ": c = rho + n^2 pi^2 / L^2 = " << rho + n * n * pi2;
      fail(os.str());
    }
  }
  if (!(rho < -cfg.delta)) {
    rep.rho_violation = true;
    std::ostringstream os;
    os << "rho = " << rho << " is not < -delta = " << -cfg.delta;
    fail(os.str());
  }
  return rep;
}

ValidationReport validate_config(const PlantConfig& cfg) {
  return validate_config(cfg, default_tol_alpha(cfg));
}

void require_valid(const PlantConfig& cfg) {
  const ValidationReport rep = validate_config(cfg);
  if (rep.ok) return;
  std::string msg = "invalid plant configuration:";
  for (const auto& v : rep.violations) msg += "\n  " + v;
  throw ConfigError(msg);
}

ModeIndex ModeIndex::parabolic(int n) {
  if (n < 1) throw std::invalid_argument("parabolic index must be >= 1");
  return {Family::Parabolic, n};
}

ModeIndex ModeIndex::hyperbolic(int m) { return {Family::Hyperbolic, m}; }

std::string ModeIndex::label() const {
  return (is_parabolic() ? "p" : "h") + std::to_string(k);
}

std::vector<int> hyperbolic_order(int M) {
  std::vector<int> out{0};
  for (int m = 1; m <= M; ++m) {
    out.push_back(-m);
    out.push_back(m);
  }
  return out;
}

}  // namespace wavecascade
