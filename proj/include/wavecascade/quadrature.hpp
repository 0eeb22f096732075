#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

namespace wavecascade {

using cplx = std::complex<double>;

/// Gauss–Legendre rule on [-1, 1].
struct GaussLegendre {
  explicit GaussLegendre(int order);
  std::vector<double> nodes;
  std::vector<double> weights;

  int order() const { return static_cast<int>(nodes.size()); }

  template <class G>
  auto integrate(G&& g, double a, double b) const -> decltype(g(a)) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    decltype(g(a)) acc{};
    for (int i = 0; i < order(); ++i) {
      acc += weights[i] * g(mid + half * nodes[i]);
    }
    return acc * half;
  }
};

/// Composite Gauss–Legendre rule over [0, L].
///
/// Panels are uniform, then split at any supplied breakpoints (kinks or jumps
/// of β), so the panel count can exceed the requested one. Nodes are sorted.
class Quadrature {
 public:
  Quadrature(double L, int panels, int order = 32,
             const std::vector<double>& breakpoints = {});

  /// The default resolution rule: panels = max(16, 2·highest mode index).
  static int default_panels(int highest_index);

  double length() const { return L_; }
  int panels() const { return static_cast<int>(edges_.size()) - 1; }
  int order() const { return rule_.order(); }
  const GaussLegendre& rule() const { return rule_; }
  const std::vector<double>& edges() const { return edges_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return nodes_.size(); }
  double max_panel_width() const;

  template <class G>
  auto integrate(G&& g) const -> decltype(g(0.0)) {
    decltype(g(0.0)) acc{};
    for (std::size_t i = 0; i < nodes_.size(); ++i) acc += weights_[i] * g(nodes_[i]);
    return acc;
  }

 private:
  double L_;
  GaussLegendre rule_;
  std::vector<double> edges_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// ∫_a^b g(s)·exp(-nu·(b - s)) ds, for nu ≥ 0.
///
/// The weight concentrates at the upper limit when nu is large; panels within
/// 40/nu of it are narrowed to 1/nu so the rule resolves the layer.
template <class G>
cplx integrate_toward(const GaussLegendre& rule, G&& g, double a, double b,
                      double nu, double max_width) {
  if (!(b > a)) return cplx(0.0);
  const double fine = nu > 0.0 ? std::fmin(max_width, 1.0 / nu) : max_width;
  const double layer = nu > 0.0 ? 40.0 / nu : 0.0;
  cplx acc(0.0);
  double e = b;
  while (e > a) {
    const double w = (b - e < layer) ? fine : max_width;
    const double s = std::fmax(a, e - w);
    acc += rule.integrate([&](double t) { return cplx(g(t)) * std::exp(-nu * (b - t)); }, s, e);
    e = s;
  }
  return acc;
}

/// ∫_a^b g(s)·exp(-nu·(s - a)) ds; mirror of integrate_toward.
template <class G>
cplx integrate_from(const GaussLegendre& rule, G&& g, double a, double b, double nu,
                    double max_width) {
  if (!(b > a)) return cplx(0.0);
  const double fine = nu > 0.0 ? std::fmin(max_width, 1.0 / nu) : max_width;
  const double layer = nu > 0.0 ? 40.0 / nu : 0.0;
  cplx acc(0.0);
  double s = a;
  while (s < b) {
    const double w = (s - a < layer) ? fine : max_width;
    const double e = std::fmin(b, s + w);
    acc += rule.integrate([&](double t) { return cplx(g(t)) * std::exp(-nu * (t - a)); }, s, e);
    s = e;
  }
  return acc;
}

/// Paired Volterra-type integrals with exponentially decaying kernels:
///   J1(x) = ∫_0^x g1(s)·exp(-nu (x - s)) ds,   J2(x) = ∫_x^L g2(s)·exp(-nu (s - x)) ds.
///
/// Every Green's-function representation in the spectral code reduces to these
/// two after scaling out the growing exponentials, so the sums never overflow
/// and never cancel. Values at panel edges are cached; point values add one
/// partial panel.
class DecayingCumulative {
 public:
  using Fn = std::function<cplx(double)>;

  DecayingCumulative(Fn g1, Fn g2, double nu, const std::vector<double>& edges,
                     int local_order);

  double nu() const { return nu_; }
  cplx J1(double x) const;
  cplx J2(double x) const;

  /// Both integrals at ascending points, in O(points + panels) work.
  void sweep(const std::vector<double>& xs, std::vector<cplx>& j1,
             std::vector<cplx>& j2) const;

 private:
  std::size_t panel_of(double x) const;

  Fn g1_, g2_;
  double nu_;
  std::vector<double> edges_;
  GaussLegendre rule_;
  std::vector<cplx> j1_edge_, j2_edge_;
};

}  // namespace wavecascade
