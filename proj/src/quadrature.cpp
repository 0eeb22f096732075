#include "wavecascade/quadrature.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

namespace wavecascade {

GaussLegendre::GaussLegendre(int order) : nodes(order), weights(order) {
  if (order < 2) throw std::invalid_argument("Gauss-Legendre order must be >= 2");
  const int n = order;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton on P_n from the Chebyshev-like initial guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
}

Quadrature::Quadrature(double L, int panels, int order, const std::vector<double>& breakpoints)
    : L_(L), rule_(order) {
  if (!(L > 0.0)) throw std::invalid_argument("quadrature length must be positive");
  if (panels < 1) throw std::invalid_argument("quadrature needs at least one panel");
  for (int k = 0; k <= panels; ++k) edges_.push_back(L * k / panels);
  edges_.back() = L;
  const double snap = 1e-12 * L;
  for (double b : breakpoints) {
    if (!(b > snap && b < L - snap)) continue;
    auto it = std::lower_bound(edges_.begin(), edges_.end(), b);
    if (it != edges_.end() && std::abs(*it - b) < snap) continue;
    if (it != edges_.begin() && std::abs(*(it - 1) - b) < snap) continue;
    edges_.insert(it, b);
  }
  for (std::size_t p = 0; p + 1 < edges_.size(); ++p) {
    const double a = edges_[p], b = edges_[p + 1];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int i = 0; i < rule_.order(); ++i) {
      nodes_.push_back(mid + half * rule_.nodes[i]);
      weights_.push_back(half * rule_.weights[i]);
    }
  }
}

int Quadrature::default_panels(int highest_index) {
  return std::max(16, 2 * std::abs(highest_index));
}

double Quadrature::max_panel_width() const {
  double w = 0.0;
  for (std::size_t p = 0; p + 1 < edges_.size(); ++p) w = std::max(w, edges_[p + 1] - edges_[p]);
  return w;
}

DecayingCumulative::DecayingCumulative(Fn g1, Fn g2, double nu, const std::vector<double>& edges,
                                       int local_order)
    : g1_(std::move(g1)), g2_(std::move(g2)), nu_(nu), edges_(edges), rule_(local_order) {
  const std::size_t np = edges_.size();
  j1_edge_.assign(np, cplx(0.0));
  j2_edge_.assign(np, cplx(0.0));
  for (std::size_t p = 0; p + 1 < np; ++p) {
    const double a = edges_[p], b = edges_[p + 1];
    j1_edge_[p + 1] = std::exp(-nu_ * (b - a)) * j1_edge_[p] +
                      integrate_toward(rule_, g1_, a, b, nu_, b - a);
  }
  for (std::size_t p = np - 1; p > 0; --p) {
    const double a = edges_[p - 1], b = edges_[p];
    j2_edge_[p - 1] = std::exp(-nu_ * (b - a)) * j2_edge_[p] +
                      integrate_from(rule_, g2_, a, b, nu_, b - a);
  }
}

std::size_t DecayingCumulative::panel_of(double x) const {
  auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
  std::size_t p = static_cast<std::size_t>(it - edges_.begin());
  p = p == 0 ? 0 : p - 1;
  return std::min(p, edges_.size() - 2);
}

cplx DecayingCumulative::J1(double x) const {
  const std::size_t p = panel_of(x);
  const double a = edges_[p], w = edges_[p + 1] - a;
  return std::exp(-nu_ * (x - a)) * j1_edge_[p] + integrate_toward(rule_, g1_, a, x, nu_, w);
}

cplx DecayingCumulative::J2(double x) const {
  const std::size_t p = panel_of(x);
  const double b = edges_[p + 1], w = b - edges_[p];
  return std::exp(-nu_ * (b - x)) * j2_edge_[p + 1] + integrate_from(rule_, g2_, x, b, nu_, w);
}

void DecayingCumulative::sweep(const std::vector<double>& xs, std::vector<cplx>& j1,
                               std::vector<cplx>& j2) const {
  const std::size_t n = xs.size();
  j1.assign(n, cplx(0.0));
  j2.assign(n, cplx(0.0));
  if (n == 0) return;
  // Forward pass: restart from the cached edge value whenever a panel is entered.
  {
    std::size_t p = panel_of(xs[0]);
    double at = edges_[p];
    cplx acc = j1_edge_[p];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t q = panel_of(xs[i]);
      if (q != p) {
        p = q;
        at = edges_[p];
        acc = j1_edge_[p];
      }
      const double w = edges_[p + 1] - edges_[p];
      acc = std::exp(-nu_ * (xs[i] - at)) * acc + integrate_toward(rule_, g1_, at, xs[i], nu_, w);
      at = xs[i];
      j1[i] = acc;
    }
  }
  {
    std::size_t p = panel_of(xs[n - 1]);
    double at = edges_[p + 1];
    cplx acc = j2_edge_[p + 1];
    for (std::size_t k = n; k-- > 0;) {
      const std::size_t q = panel_of(xs[k]);
      if (q != p) {
        p = q;
        at = edges_[p + 1];
        acc = j2_edge_[p + 1];
      }
      const double w = edges_[p + 1] - edges_[p];
      acc = std::exp(-nu_ * (at - xs[k])) * acc + integrate_from(rule_, g2_, xs[k], at, nu_, w);
      at = xs[k];
      j2[k] = acc;
    }
  }
}

}  // namespace wavecascade
