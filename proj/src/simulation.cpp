#include "wavecascade/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace wavecascade {

void SimConfig::validate() const {
  if (N0 < 1 || N < N0 + 1 || M < 0) throw ConfigError("simulation: need N >= N0 + 1 >= 2 and M >= 0");
  if (Np < N || Mp < M) {
    throw ConfigError("simulation: the plant truncation (Np, Mp) must cover the controller (N, M)");
  }
  if (!(dt > 0.0) || !(T > 0.0)) throw ConfigError("simulation: dt and T must be positive");
  if (save_stride < 1) throw ConfigError("simulation: save_stride must be >= 1");
  if (!open_loop && (gains.K.size() != N0 + 1 || gains.L_obs.size() != N0)) {
    throw ConfigError("simulation: gains do not match N0 = " + std::to_string(N0));
  }
}

ClosedLoopSystem::ClosedLoopSystem(const ModalCatalog& cat, SimConfig cfg)
    : cat_(cat), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.Np > cat_.n_max() || cfg_.Mp > cat_.m_max()) {
    throw ConfigError("simulation: modal catalog does not cover (Np, Mp)");
  }
  const PlantConfig& pc = cat_.config();
  for (int n = 1; n <= cfg_.Np; ++n) plant_modes_.push_back(ModeIndex::parabolic(n));
  for (int m = -cfg_.Mp; m <= cfg_.Mp; ++m) plant_modes_.push_back(ModeIndex::hyperbolic(m));
  for (int n = 1; n <= cfg_.N; ++n) observer_modes_.push_back(ModeIndex::parabolic(n));
  for (int m = -cfg_.M; m <= cfg_.M; ++m) observer_modes_.push_back(ModeIndex::hyperbolic(m));
  nw_ = static_cast<int>(plant_modes_.size());
  nh_ = static_cast<int>(observer_modes_.size());
  const int D = dim(), iv = D - 1;

  c_plant_.resize(nw_);
  c_obs_.resize(nh_);
  for (int i = 0; i < nw_; ++i) c_plant_(i) = cat_.mode(plant_modes_[i]).c;
  for (int j = 0; j < nh_; ++j) c_obs_(j) = cat_.mode(observer_modes_[j]).c;

  vd_row_ = Eigen::RowVectorXcd::Zero(D);
  if (!cfg_.open_loop) {
    vd_row_(iv) = cfg_.gains.K(0);
    for (int n = 1; n <= cfg_.N0; ++n) vd_row_(nw_ + n - 1) = cfg_.gains.K(n);
  }
  // innovation = Σ c ŵ − y_o as a row over X.
  Eigen::RowVectorXcd innov = Eigen::RowVectorXcd::Zero(D);
  innov.segment(nw_, nh_) = c_obs_;
  innov.head(nw_) = -c_plant_;

  A_ = Eigen::MatrixXcd::Zero(D, D);
  diag_ = Eigen::VectorXcd::Zero(D);
  auto modal_row = [&](int row, const ModalData& d) {
    diag_(row) = d.lambda;
    A_(row, row) += d.lambda;
    A_(row, iv) += d.a;
    A_.row(row) += d.b * vd_row_;
  };
  for (int i = 0; i < nw_; ++i) modal_row(i, cat_.mode(plant_modes_[i]));
  for (int j = 0; j < nh_; ++j) {
    modal_row(nw_ + j, cat_.mode(observer_modes_[j]));
    const ModeIndex idx = observer_modes_[j];
    if (!cfg_.open_loop && idx.is_parabolic() && idx.k <= cfg_.N0) {
      A_.row(nw_ + j) -= cfg_.gains.L_obs(idx.k - 1) * innov;
    }
  }
  A_.row(iv) = vd_row_;
  abscissa_ = Eigen::ComplexEigenSolver<Eigen::MatrixXcd>(A_, false).eigenvalues().real().maxCoeff();

  const Quadrature& q = cat_.quadrature();
  quad_x_ = Eigen::Map<const Eigen::VectorXd>(q.nodes().data(), static_cast<Eigen::Index>(q.size()));
  quad_w_ = Eigen::Map<const Eigen::VectorXd>(q.weights().data(), static_cast<Eigen::Index>(q.size()));
  const Eigen::Index nq = quad_x_.size();
  tab_f1_.resize(nq, nw_);
  tab_f1x_.resize(nq, nw_);
  tab_f2x_.resize(nq, nw_);
  tab_f3_.resize(nq, nw_);
  phi3_L_.resize(nw_);
  for (int i = 0; i < nw_; ++i) {
    const EigenPair& p = cat_.mode(plant_modes_[i]).pair;
    const std::vector<FieldValue> vals = p.phi_at(q.nodes());
    for (Eigen::Index k = 0; k < nq; ++k) {
      tab_f1_(k, i) = vals[k].f1;
      tab_f1x_(k, i) = vals[k].f1_x;
      tab_f2x_(k, i) = vals[k].f2_x;
      tab_f3_(k, i) = vals[k].f3;
    }
    phi3_L_(i) = p.phi(pc.L).f3;
  }
}

double ClosedLoopSystem::spectral_abscissa() const { return abscissa_; }

double ClosedLoopSystem::max_abs_lambda() const { return diag_.cwiseAbs().maxCoeff(); }

int ClosedLoopSystem::plant_slot(ModeIndex idx) const {
  if (idx.is_parabolic()) return idx.k >= 1 && idx.k <= cfg_.Np ? idx.k - 1 : -1;
  return std::abs(idx.k) <= cfg_.Mp ? cfg_.Np + idx.k + cfg_.Mp : -1;
}

Eigen::VectorXcd ClosedLoopSystem::pack(const ClosedLoopState& s) const {
  if (s.w.size() != nw_ || s.w_hat.size() != nh_) throw ConfigError("simulation: state size mismatch");
  Eigen::VectorXcd X(dim());
  X << s.w, s.w_hat, cplx(s.v);
  return X;
}

ClosedLoopState ClosedLoopSystem::unpack(const Eigen::VectorXcd& X) const {
  ClosedLoopState s;
  s.w = X.head(nw_);
  s.w_hat = X.segment(nw_, nh_);
  s.v = X(dim() - 1).real();
  return s;
}

ClosedLoopState ClosedLoopSystem::project_initial_state() const {
  const PlantConfig& pc = cat_.config();
  const InitialCondition& ic = cfg_.ic;
  const double L = pc.L, h = 1e-4 * L;
  auto dz0 = [&](double x) {
    if (ic.dz0) return ic.dz0(x);
    return (ic.z0(x - 2 * h) - 8 * ic.z0(x - h) + 8 * ic.z0(x + h) - ic.z0(x + 2 * h)) / (12 * h);
  };
  const Eigen::Index nq = quad_x_.size();
  // W(0) = (y0, z0, z1 − x·v(0)/(αL)) at the nodes.
  Eigen::VectorXcd W1(nq), W2x(nq), W3(nq);
  for (Eigen::Index k = 0; k < nq; ++k) {
    const double x = quad_x_(k);
    W1(k) = ic.y0(x);
    W2x(k) = dz0(x);
    W3(k) = ic.z1(x) - x * ic.v0 / (pc.alpha * L);
  }
  ClosedLoopState s;
  s.v = ic.v0;
  s.w.resize(nw_);
  const Quadrature& q = cat_.quadrature();
  for (int i = 0; i < nw_; ++i) {
    const std::vector<FieldValue> psi = cat_.mode(plant_modes_[i]).pair.psi_at(q.nodes());
    cplx acc = 0.0;
    for (Eigen::Index k = 0; k < nq; ++k) {
      acc += quad_w_(k) * (W1(k) * std::conj(psi[k].f1) + W2x(k) * std::conj(psi[k].f2_x) +
                           W3(k) * std::conj(psi[k].f3));
    }
    s.w(i) = acc;
  }
  s.w_hat = Eigen::VectorXcd::Zero(nh_);
  if (ic.observer == InitialCondition::ObserverInit::Exact) {
    for (int j = 0; j < nh_; ++j) s.w_hat(j) = s.w(plant_slot(observer_modes_[j]));
  }
  return s;
}

ClosedLoopState ClosedLoopSystem::derivative(const ClosedLoopState& s) const {
  return unpack(A_ * pack(s));
}

double ClosedLoopSystem::y_o(const ClosedLoopState& s) const { return (c_plant_ * s.w)(0).real(); }

double ClosedLoopSystem::innovation(const ClosedLoopState& s) const {
  return (c_obs_ * s.w_hat)(0).real() - y_o(s);
}

double ClosedLoopSystem::v_d(const ClosedLoopState& s) const {
  return (vd_row_ * pack(s))(0).real();
}

double ClosedLoopSystem::z_o(const ClosedLoopState& s) const {
  return (phi3_L_.transpose() * s.w)(0).real() + s.v / cat_.config().alpha;
}

double ClosedLoopSystem::u(const ClosedLoopState& s) const {
  return -cat_.config().alpha * z_o(s) + s.v;
}

Fields ClosedLoopSystem::reconstruct_fields(const ClosedLoopState& s,
                                            const std::vector<double>& xs) const {
  return reconstruct_fields(std::vector<ClosedLoopState>{s}, xs).front();
}

std::vector<Fields> ClosedLoopSystem::reconstruct_fields(const std::vector<ClosedLoopState>& states,
                                                         const std::vector<double>& xs) const {
  if (!std::is_sorted(xs.begin(), xs.end())) throw ConfigError("reconstruct_fields: grid must ascend");
  const PlantConfig& pc = cat_.config();
  const std::size_t nx = xs.size();
  // Tabulate only the modes some state excites.
  std::vector<std::vector<FieldValue>> table(nw_);
  for (int i = 0; i < nw_; ++i) {
    const bool used = std::any_of(states.begin(), states.end(),
                                  [&](const ClosedLoopState& st) { return st.w(i) != cplx(0.0); });
    if (used) table[i] = cat_.mode(plant_modes_[i]).pair.phi_at(xs);
  }
  std::vector<Fields> out;
  out.reserve(states.size());
  std::vector<cplx> y(nx), z(nx), zt(nx);
  for (const ClosedLoopState& s : states) {
    std::fill(y.begin(), y.end(), cplx(0.0));
    std::fill(z.begin(), z.end(), cplx(0.0));
    std::fill(zt.begin(), zt.end(), cplx(0.0));
    for (int i = 0; i < nw_; ++i) {
      const cplx wi = s.w(i);
      if (wi == cplx(0.0)) continue;
      const std::vector<FieldValue>& vals = table[i];
      for (std::size_t k = 0; k < nx; ++k) {
        y[k] += wi * vals[k].f1;
        z[k] += wi * vals[k].f2;
        zt[k] += wi * vals[k].f3;
      }
    }
    Fields f;
    f.x = xs;
    f.y.resize(nx);
    f.z.resize(nx);
    f.zt.resize(nx);
    double scale = 0.0, imag = 0.0;
    for (std::size_t k = 0; k < nx; ++k) {
      zt[k] += xs[k] * s.v / (pc.alpha * pc.L);
      f.y[k] = y[k].real();
      f.z[k] = z[k].real();
      f.zt[k] = zt[k].real();
      scale = std::max({scale, std::abs(y[k]), std::abs(z[k]), std::abs(zt[k])});
      imag = std::max({imag, std::abs(y[k].imag()), std::abs(z[k].imag()), std::abs(zt[k].imag())});
    }
    f.imag_residue = imag;
    f.u = u(s);
    if (imag > 1e-8 * std::max(scale, 1e-300) && imag > 1e-300) {
      std::ostringstream os;
      os << "reconstructed fields have imaginary residue " << imag << " against scale " << scale
         << " (conjugate symmetry of the hyperbolic pairs is broken)";
      throw ConjugateSymmetryError(os.str());
    }
    out.push_back(std::move(f));
  }
  return out;
}

Norms ClosedLoopSystem::compute_norms(const ClosedLoopState& s) const {
  Norms out;
  double m0 = 0.0, m1 = 0.0;
  for (int i = 0; i < nw_; ++i) {
    const double a2 = std::norm(s.w(i));
    m0 += a2;
    const ModeIndex& idx = plant_modes_[i];
    m1 += idx.is_parabolic() ? double(idx.k) * idx.k * a2 : a2;
  }
  out.H0_modal = std::sqrt(m0);
  out.H1_modal = std::sqrt(m1);

  const PlantConfig& pc = cat_.config();
  const Eigen::VectorXcd y = tab_f1_ * s.w;
  const Eigen::VectorXcd yx = tab_f1x_ * s.w;
  const Eigen::VectorXcd zx = tab_f2x_ * s.w;
  const Eigen::VectorXcd zt =
      tab_f3_ * s.w + (quad_x_ * (s.v / (pc.alpha * pc.L))).cast<cplx>();
  double d0 = 0.0, d1 = 0.0;
  for (Eigen::Index k = 0; k < quad_x_.size(); ++k) {
    const double wave = std::norm(zx(k)) + std::norm(zt(k));
    d0 += quad_w_(k) * (std::norm(y(k)) + wave);
    d1 += quad_w_(k) * (std::norm(yx(k)) + wave);
  }
  out.H0_direct = std::sqrt(d0);
  out.H1_direct = std::sqrt(d1);
  return out;
}

std::vector<std::string> ClosedLoopSystem::initial_data_warnings() const {
  const InitialCondition& ic = cfg_.ic;
  const double L = cat_.config().L;
  std::vector<std::string> out;
  auto check = [&](double val, const char* what) {
    if (std::abs(val) > 1e-10) {
      std::ostringstream os;
      os << "initial data not boundary compatible: " << what << " = " << val
         << " (projection still defined)";
      out.push_back(os.str());
    }
  };
  check(ic.y0(0.0), "y0(0)");
  check(ic.y0(L), "y0(L)");
  check(ic.z0(0.0), "z0(0)");
  return out;
}

Trajectory ClosedLoopSystem::integrate() const {
  Trajectory tr = integrate(project_initial_state());
  const auto w = initial_data_warnings();
  tr.warnings.insert(tr.warnings.begin(), w.begin(), w.end());
  return tr;
}

Trajectory ClosedLoopSystem::integrate(const ClosedLoopState& initial) const {
  Trajectory tr;
  const long steps = std::max(1L, static_cast<long>(std::ceil(cfg_.T / cfg_.dt - 1e-9)));
  const double h = cfg_.T / static_cast<double>(steps);
  tr.dt_used = h;
  bool split = cfg_.integrator == SimConfig::Integrator::Splitting;
  if (cfg_.integrator == SimConfig::Integrator::Auto) {
    split = h * max_abs_lambda() > cfg_.stiffness_limit;
  }
  tr.integrator = split ? "splitting" : "rk4";

  Eigen::VectorXcd X = pack(initial);
  const int D = dim();
  // Integrating-factor RK4: the diagonal λ is propagated exactly, RK4 carries
  // only the coupling 𝔸 − diag(λ).
  Eigen::MatrixXcd Nc = A_;
  Eigen::VectorXcd E_half = Eigen::VectorXcd::Ones(D), E_full = Eigen::VectorXcd::Ones(D);
  if (split) {
    for (int i = 0; i < D; ++i) {
      Nc(i, i) -= diag_(i);
      E_half(i) = std::exp(diag_(i) * (0.5 * h));
      E_full(i) = E_half(i) * E_half(i);
    }
  }

  double scale = 0.0;
  auto record = [&](double t) {
    const ClosedLoopState s = unpack(X);
    tr.t.push_back(t);
    tr.y_o.push_back(y_o(s));
    tr.v.push_back(s.v);
    tr.v_d.push_back(v_d(s));
    tr.z_o.push_back(z_o(s));
    tr.u.push_back(u(s));
    tr.norms.push_back(compute_norms(s));
    double e1 = 0.0, e2 = 0.0;
    for (int j = 0; j < nh_; ++j) {
      const ModeIndex idx = observer_modes_[j];
      const double d = std::norm(s.w(plant_slot(idx)) - s.w_hat(j));
      (idx.is_parabolic() ? e1 : e2) += d;
    }
    tr.e1.push_back(std::sqrt(e1));
    tr.e2.push_back(std::sqrt(e2));
    scale = std::max(scale, s.w.cwiseAbs().maxCoeff());
    for (int m = 1; m <= cfg_.Mp; ++m) {
      const cplx a = s.w(plant_slot(ModeIndex::hyperbolic(-m)));
      const cplx b = s.w(plant_slot(ModeIndex::hyperbolic(m)));
      tr.conj_drift = std::max(tr.conj_drift, std::abs(a - std::conj(b)) / std::max(scale, 1e-300));
    }
    tr.states.push_back(s);
  };

  const double x0 = std::max(X.cwiseAbs().maxCoeff(), 1e-300);
  record(0.0);
  for (long k = 1; k <= steps; ++k) {
    if (split) {
      const Eigen::VectorXcd k1 = h * (Nc * X);
      const Eigen::VectorXcd k2 = h * (Nc * E_half.cwiseProduct(X + 0.5 * k1));
      const Eigen::VectorXcd k3 = h * (Nc * (E_half.cwiseProduct(X) + 0.5 * k2));
      const Eigen::VectorXcd k4 = h * (Nc * (E_full.cwiseProduct(X) + E_half.cwiseProduct(k3)));
      X = E_full.cwiseProduct(X) +
          (E_full.cwiseProduct(k1) + 2.0 * E_half.cwiseProduct(k2 + k3) + k4) / 6.0;
    } else {
      const Eigen::VectorXcd k1 = A_ * X;
      const Eigen::VectorXcd k2 = A_ * (X + (0.5 * h) * k1);
      const Eigen::VectorXcd k3 = A_ * (X + (0.5 * h) * k2);
      const Eigen::VectorXcd k4 = A_ * (X + h * k3);
      X += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const double mag = X.cwiseAbs().maxCoeff();
    // Non-normal transients stay far below 1e10 for these loops; an explicit
    // scheme run past its stability limit passes it within a few steps.
    if (!std::isfinite(mag) || mag > 1e10 * x0 * std::exp(std::max(0.0, abscissa_) * k * h)) {
      std::ostringstream os;
      os << "simulation diverged at t = " << k * h << " (|X| = " << mag << ", integrator "
         << tr.integrator << ", dt = " << h << ", dt*max|lambda| = " << h * max_abs_lambda() << ")";
      throw DivergenceError(os.str(), k * h);
    }
    if (k % cfg_.save_stride == 0 || k == steps) record(k * h);
  }
  if (tr.conj_drift > 1e-8) {
    std::ostringstream os;
    os << "conjugate-symmetry drift " << tr.conj_drift << " exceeds 1e-8";
    tr.warnings.push_back(os.str());
  }
  return tr;
}

DecayFit estimate_decay_rate(const std::vector<double>& t, const std::vector<double>& values,
                             double t1, double t2) {
  if (!(t2 > t1) || t1 < 0.0) throw ConfigError("decay fit: need t2 > t1 >= 0");
  if (t.size() != values.size() || t.empty()) throw ConfigError("decay fit: series size mismatch");
  const double floor = 1e-14 * values.front();
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t1 - 1e-12 || t[i] > t2 + 1e-12) continue;
    xs.push_back(t[i]);
    ys.push_back(std::log(values[i] + floor));
  }
  if (xs.size() < 8) {
    throw InsufficientDataError("decay fit: " + std::to_string(xs.size()) +
                                " samples in the window, need at least 8");
  }
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / n;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (icpt + slope * xs[i]);
    rss += r * r;
  }
  DecayFit fit;
  fit.rate = -slope;
  fit.residual = std::sqrt(rss / n);
  fit.samples = static_cast<int>(xs.size());
  return fit;
}

DecayFit estimate_decay_rate(const Trajectory& traj, double t1, double t2, NormKind kind) {
  std::vector<double> vals;
  vals.reserve(traj.norms.size());
  for (const Norms& nm : traj.norms) {
    switch (kind) {
      case NormKind::H0Modal: vals.push_back(nm.H0_modal); break;
      case NormKind::H0Direct: vals.push_back(nm.H0_direct); break;
      case NormKind::H1Modal: vals.push_back(nm.H1_modal); break;
      case NormKind::H1Direct: vals.push_back(nm.H1_direct); break;
    }
  }
  return estimate_decay_rate(traj.t, vals, t1, t2);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const ClosedLoopSystem& sys,
                          bool mode_magnitudes) {
  const int np = sys.config().Np, mp = sys.config().Mp;
  os << "t,v,v_d,u,y_o,H0_modal,H0_direct,H1_modal,H1_direct,e1_norm,e2_norm";
  if (mode_magnitudes) {
    for (int n = 1; n <= np; ++n) os << ",abs_w1_" << n;
    for (int m = -mp; m <= mp; ++m) os << ",abs_w2_" << m;
  }
  os << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    const Norms& nm = traj.norms[i];
    os << traj.t[i] << ',' << traj.v[i] << ',' << traj.v_d[i] << ',' << traj.u[i] << ','
       << traj.y_o[i] << ',' << nm.H0_modal << ',' << nm.H0_direct << ',' << nm.H1_modal << ','
       << nm.H1_direct << ',' << traj.e1[i] << ',' << traj.e2[i];
    if (mode_magnitudes) {
      for (Eigen::Index k = 0; k < traj.states[i].w.size(); ++k) {
        os << ',' << std::abs(traj.states[i].w(k));
      }
    }
    os << '\n';
  }
}

void write_field_csv(std::ostream& os, const Trajectory& traj, const ClosedLoopSystem& sys,
                     const std::vector<double>& grid, const std::string& which) {
  if (which != "y" && which != "z" && which != "zt") {
    throw ConfigError("field must be y, z or zt, got '" + which + "'");
  }
  os << "t";
  os << std::setprecision(17);
  for (double x : grid) os << ",x=" << x;
  os << '\n';
  const std::vector<Fields> fields = sys.reconstruct_fields(traj.states, grid);
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    const Fields& f = fields[i];
    const std::vector<double>& col = which == "y" ? f.y : which == "z" ? f.z : f.zt;
    os << traj.t[i];
    for (double v : col) os << ',' << v;
    os << '\n';
  }
}

}  // namespace wavecascade
