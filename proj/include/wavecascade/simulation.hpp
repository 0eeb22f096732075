#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wavecascade/errors.hpp"
#include "wavecascade/modal.hpp"
#include "wavecascade/synthesis.hpp"

namespace wavecascade {

/// Too few samples in a decay-fit window.
class InsufficientDataError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Reconstructed fields carry an imaginary part although the data are real.
class ConjugateSymmetryError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct InitialCondition {
  std::function<double(double)> y0 = [](double) { return 0.0; };
  std::function<double(double)> z0 = [](double) { return 0.0; };
  std::function<double(double)> z1 = [](double) { return 0.0; };
  /// z0'; a fourth-order central difference of z0 when empty.
  std::function<double(double)> dz0;
  double v0 = 0.0;

  enum class ObserverInit { Zero, Exact };
  ObserverInit observer = ObserverInit::Zero;
};

struct SimConfig {
  int Np = 8, Mp = 20;    // plant: n = 1..Np, m = −Mp..Mp
  int N0 = 1, N = 2, M = 8;  // controller
  GainSet gains;
  double T = 6.0;
  double dt = 2e-4;
  int save_stride = 50;

  enum class Integrator { Auto, RK4, Splitting };
  Integrator integrator = Integrator::Auto;
  /// Auto switches to splitting when dt·max|λ| exceeds this.
  double stiffness_limit = 2.5;
  /// v ≡ 0: the controller is disconnected and v_d = 0.
  bool open_loop = false;
  InitialCondition ic;

  void validate() const;
};

struct ClosedLoopState {
  Eigen::VectorXcd w;      // w₁,₁..w₁,Np, then w₂,−Mp..w₂,Mp
  Eigen::VectorXcd w_hat;  // ŵ₁,₁..ŵ₁,N, then ŵ₂,−M..ŵ₂,M
  double v = 0.0;
};

struct Norms {
  // Norms, not squares. The modal values are the Riesz-equivalent surrogates
  // (Σ|w₁|² + Σ|w₂|²)^½ and (Σn²|w₁|² + Σ|w₂|²)^½; the direct ones integrate
  // the physical fields (y, z, ∂ₜz), with ∂ₜz including the lift.
  double H0_modal = 0.0, H0_direct = 0.0, H1_modal = 0.0, H1_direct = 0.0;
};

struct Fields {
  std::vector<double> x, y, z, zt;
  double u = 0.0;
  double imag_residue = 0.0;  // max |Im| over the three fields
};

struct Trajectory {
  std::vector<double> t;
  std::vector<ClosedLoopState> states;
  std::vector<double> y_o, v, v_d, u, z_o;
  std::vector<Norms> norms;
  std::vector<double> e1, e2;  // observer errors over the controller's parabolic/hyperbolic modes
  double conj_drift = 0.0;     // max |w₂,−m − conj w₂,m| relative to the state scale
  double dt_used = 0.0;
  std::string integrator;
  std::vector<std::string> warnings;
};

/// The truncated closed loop (plant, integrator, observer/controller) as one
/// linear system Ẋ = 𝔸X on X = (w, ŵ, v).
class ClosedLoopSystem {
 public:
  /// The catalog must cover max(Np, N) parabolic and max(Mp, M) hyperbolic modes.
  ClosedLoopSystem(const ModalCatalog& cat, SimConfig cfg);

  const SimConfig& config() const { return cfg_; }
  const ModalCatalog& catalog() const { return cat_; }
  int plant_dim() const { return nw_; }
  int observer_dim() const { return nh_; }
  int dim() const { return nw_ + nh_ + 1; }
  const Eigen::MatrixXcd& generator() const { return A_; }
  /// Largest |λ| on the diagonal, the stiffness measure.
  double max_abs_lambda() const;
  /// max Re eig(𝔸): the exact growth bound the divergence check allows for.
  double spectral_abscissa() const;

  /// w(0) = ⟨W(0), ψ⟩ with W(0) = (y0, z0, z1 − x·v(0)/(αL)); ŵ(0) per ic.observer.
  ClosedLoopState project_initial_state() const;
  /// y0(0), y0(L) or z0(0) away from zero.
  std::vector<std::string> initial_data_warnings() const;

  ClosedLoopState derivative(const ClosedLoopState& s) const;
  double y_o(const ClosedLoopState& s) const;
  /// Σ c ŵ − y_o over the controller's modes.
  double innovation(const ClosedLoopState& s) const;
  double v_d(const ClosedLoopState& s) const;
  /// u = −α∂ₜz(L) + v.
  double u(const ClosedLoopState& s) const;
  double z_o(const ClosedLoopState& s) const;

  /// Fields at ascending points in [0, L]. Throws ConjugateSymmetryError when
  /// the imaginary residue exceeds 1e−8 of the field scale.
  Fields reconstruct_fields(const ClosedLoopState& s, const std::vector<double>& xs) const;
  /// Same for many states; each eigenfunction is evaluated on xs once.
  std::vector<Fields> reconstruct_fields(const std::vector<ClosedLoopState>& states,
                                         const std::vector<double>& xs) const;
  Norms compute_norms(const ClosedLoopState& s) const;

  /// Throws DivergenceError on a non-finite state or one exceeding
  /// 1e10·|X(0)|·exp(max(0, abscissa)·t).
  Trajectory integrate() const;
  Trajectory integrate(const ClosedLoopState& initial) const;

  Eigen::VectorXcd pack(const ClosedLoopState& s) const;
  ClosedLoopState unpack(const Eigen::VectorXcd& X) const;

  /// Plant slot of mode idx, or −1.
  int plant_slot(ModeIndex idx) const;

 private:
  const ModalCatalog& cat_;
  SimConfig cfg_;
  std::vector<ModeIndex> plant_modes_, observer_modes_;
  int nw_ = 0, nh_ = 0;
  Eigen::MatrixXcd A_;
  double abscissa_ = 0.0;
  Eigen::VectorXcd diag_;        // λ of every slot, 0 for v
  Eigen::RowVectorXcd c_plant_, c_obs_;
  Eigen::RowVectorXcd vd_row_;   // v_d as a row over X
  Eigen::VectorXcd phi3_L_;      // φ³(L) per plant mode
  // Plant eigenvectors at the catalog's quadrature nodes, one column per mode.
  Eigen::MatrixXcd tab_f1_, tab_f1x_, tab_f2x_, tab_f3_;
  Eigen::VectorXd quad_w_, quad_x_;
};

struct DecayFit {
  double rate = 0.0;      // −slope of log(norm + floor)
  double residual = 0.0;  // RMS of the log-linear fit
  int samples = 0;
};

enum class NormKind { H0Modal, H0Direct, H1Modal, H1Direct };

/// Least-squares fit on t ∈ [t1, t2]. floor = 1e−14·values[0]. Throws
/// InsufficientDataError for fewer than 8 samples.
DecayFit estimate_decay_rate(const std::vector<double>& t, const std::vector<double>& values,
                             double t1, double t2);
DecayFit estimate_decay_rate(const Trajectory& traj, double t1, double t2, NormKind kind);

/// Columns t, v, v_d, u, y_o, H0_modal, H0_direct, H1_modal, H1_direct, e1_norm,
/// e2_norm, plus |w| per plant mode when requested; 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const ClosedLoopSystem& sys,
                          bool mode_magnitudes = false);

/// Rows = sample times, columns = grid points; `which` is "y", "z" or "zt".
void write_field_csv(std::ostream& os, const Trajectory& traj, const ClosedLoopSystem& sys,
                     const std::vector<double>& grid, const std::string& which);

}  // namespace wavecascade
