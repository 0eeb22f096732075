#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wavecascade/coupling.hpp"
#include "wavecascade/errors.hpp"
#include "wavecascade/modal.hpp"

namespace wavecascade {

/// Gain targets or supplied gains leave the closed loop too slow.
class InfeasibleGainsError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct ReducedModel {
  int N0 = 1, N = 2, M = 0;
  double kappa = 0.0;
  double delta = 1.0, rho = 0.0;
  MeasurementSpec::Kind measurement = MeasurementSpec::Kind::Dirichlet;

  Eigen::MatrixXd A0;     // diag(λ₁,₁..λ₁,N0)
  Eigen::VectorXd B_a0, B_b0;
  Eigen::MatrixXd A1;     // [[0, 0], [B_a0, A0]]
  Eigen::VectorXd B1;     // [1; B_b0]
  Eigen::RowVectorXd C0;  // c₁,₁..c₁,N0

  std::vector<ModeIndex> order2;  // modes of A2: N0+1..N, then hyperbolic_order(M)
  Eigen::VectorXcd A2;            // diagonal
  Eigen::VectorXcd B_a1, B_b1;
  Eigen::RowVectorXcd C1;         // parabolic entries divided by k^κ

  std::vector<double> gamma_scaled, gamma_magnitude;  // n ≤ N0
  std::vector<double> c_magnitude;  // scale for the c₁,ₙ ≠ 0 test, n ≤ N0
  double lambda_next = 0.0;         // λ₁,N+1, the first neglected parabolic eigenvalue
  TailSums tails;

  int dim2() const { return static_cast<int>(A2.size()); }
};

/// Hypotheses of the stabilization result at N0: λ₁,N0+1 < −δ and ρ < −δ.
void require_design_hypotheses(const PlantConfig& cfg, int N0);

/// Slices a catalog. The tail table, when given, must share the catalog's plant.
ReducedModel build_reduced_model(const ModalCatalog& cat, const TailTable& tails, int N0, int N,
                                 int M);
ReducedModel build_reduced_model(const PlantConfig& cfg, const MeasurementSpec& spec, int N0,
                                 int N, int M);

struct KalmanReport {
  bool satisfied = false;
  int rank = 0;                      // of the Kalman matrix, for the report
  int dim = 0;
  bool coefficient_verdict = false;  // from γₙ or c₁,ₙ
  std::vector<int> culprits;         // parabolic indices with vanishing coefficient
  std::vector<int> rank_culprits;    // modes failing the Hautus rank test
  double threshold = 0.0;            // rank threshold at which the verdicts agreed
  std::string what;
};

/// Rank of [B, AB, …] (or the observability dual, pass a row) after row and
/// column equilibration, by column-pivoted QR with relative threshold tol.
int kalman_rank(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double tol = 1e-8);

/// Positions i with rank [A − eigs[i]·I, B] < n by column-pivoted QR at relative
/// threshold tol. Row r is divided by max(its norm, row_floor[r]). Decides the
/// same property as the Kalman rank, one eigenvalue at a time.
std::vector<int> hautus_defects(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                const std::vector<double>& eigs, double tol,
                                const std::vector<double>& row_floor = {});

/// Relative threshold under which γₙ or c₁,ₙ counts as zero.
inline constexpr double kCoefficientZeroTol = 1e-8;

/// (A1, B1) against {γₙ ≠ 0, n ≤ N0}. Throws NumericalError when the Hautus
/// rank test names different modes at every threshold in [1e−12, 1e−6].
KalmanReport check_controllability(const ReducedModel& model);
/// (A0, C0) against {c₁,ₙ ≠ 0, n ≤ N0}.
KalmanReport check_observability(const ReducedModel& model);

/// Single-input assignment: returns G with eig(A + B·G) = targets, verified to
/// 1e−8·max(1, |target|). Throws KalmanError for an uncontrollable pair.
Eigen::RowVectorXd place_poles(const Eigen::MatrixXd& A, const Eigen::VectorXd& B,
                               const std::vector<cplx>& targets);

/// Multiset distance: max over a greedy nearest matching.
double spectrum_mismatch(const Eigen::VectorXcd& got, const std::vector<cplx>& want);

struct GainSet {
  Eigen::RowVectorXd K;      // k_v, k₁,₁..k₁,N0
  Eigen::VectorXd L_obs;     // l₁,₁..l₁,N0
  std::vector<cplx> K_targets, L_targets;
};

/// {−2δ, −3δ, …} for K and {−4δ, −5δ, …} for the observer.
std::vector<cplx> default_K_targets(double delta, int N0);
std::vector<cplx> default_L_targets(double delta, int N0);

/// Places both spectra; empty targets select the defaults.
GainSet design_gains(const ReducedModel& model, std::vector<cplx> K_targets = {},
                     std::vector<cplx> L_targets = {});

struct ClosedLoopMatrices {
  Eigen::MatrixXcd F;
  Eigen::VectorXcd script_L;
  Eigen::RowVectorXcd E, K_tilde;
  /// Union of the diagonal block spectra (F is block triangular).
  Eigen::VectorXcd block_spectrum;
  double abscissa = 0.0;
};

/// State order Ŵ₁, E₁, Ŵ₂, E₂. Throws InfeasibleGainsError if the spectral
/// abscissa is not below −δ.
ClosedLoopMatrices build_closed_loop_F(const ReducedModel& model, const GainSet& gains);

struct LyapunovSolution {
  Eigen::MatrixXcd P;
  double residual = 0.0;  // ‖F*P + PF + 2δP + I‖∞ / ‖P‖∞
  double min_eig = 0.0;
  double hermitian_defect = 0.0;
};

/// F*P + PF + 2δP = −I by complex Schur reduction of F + δI.
LyapunovSolution solve_lyapunov(const Eigen::MatrixXcd& F, double delta);

/// Stabilizing solution of A*X + XA + XRX + Q = 0 from the matrix sign function
/// of its Hamiltonian; empty when the iteration does not settle (eigenvalues
/// on the imaginary axis).
std::optional<Eigen::MatrixXcd> solve_riccati(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& R,
                                              const Eigen::MatrixXcd& Q);

struct CertificateParams {
  enum class Mode {
    Auto,      // the proof recipe: fixed ε, ηᵢ = 1/√S
    Manual,    // user-supplied ε, η₁, η₂
    // P free: scan ε, take the largest ηᵢ the Γ constraints allow, decide
    // Θ ⪯ 0 by the bounded-real lemma and build P from its Riccati equation.
    BoundedReal,
  };
  Mode mode = Mode::Auto;
  double epsilon = 0.0, eta1 = 0.0, eta2 = 0.0;
  int epsilon_samples = 200;  // BoundedReal only
};

inline constexpr double kEtaCap = 1e12;

struct Certificate {
  int N = 0, M = 0;
  Eigen::MatrixXcd P;
  double lyapunov_residual = 0.0;
  double P_min_eig = 0.0;
  double epsilon = 0.0, eta1 = 0.0, eta2 = 0.0;
  double Gamma1 = 0.0, Gamma2 = 0.0;
  double theta_max_eig = 0.0;  // direct form
  double schur_max_eig = 0.0;  // Schur-complement form
  double tol_psd = 0.0;
  bool theta_ok = false, schur_ok = false;
  bool verdicts_agree = true;
  bool feasible = false;
  double kappa = 0.0;
  std::string mode;
  std::string p_source = "lyapunov";  // or "riccati"
  // BoundedReal only: Ψ = sup_ω S_a|E(iω − F − δ)⁻¹𝓛|² + S_b|K̃(…)⁻¹𝓛|² and
  // ε·(1/η₁ + 1/η₂)·Ψ, which must be < 1 for any P to exist.
  double spillover_gain = 0.0;
  double bounded_real_margin = 0.0;
  double riccati_mu = 0.0;
  /// max(Γ₁, Γ₂, θ − tol): ≤ 0 exactly when feasible.
  double violation() const;
};

/// Throws ConfigError for ε ≤ L²/π² or η ≤ 0 in manual mode and
/// NumericalError when the Θ verdicts disagree by more than 1e−8.
Certificate check_certificate(const ReducedModel& model, const GainSet& gains,
                              const CertificateParams& params, double L);

/// ε = 2·max(L²/π², 1/(−ρ − δ)).
double auto_epsilon(double L, double rho, double delta);

struct SearchEvaluation {
  int N = 0, M = 0;
  bool feasible = false;
  double Gamma1 = 0, Gamma2 = 0, theta_max_eig = 0, schur_max_eig = 0, tol_psd = 0;
  double epsilon = 0, eta1 = 0, eta2 = 0;
  bool verdicts_agree = true;
};

struct SearchResult {
  bool found = false;
  int N = 0, M = 0;
  Certificate certificate;  // the feasible one, or the least violating
  GainSet gains;
  std::vector<SearchEvaluation> evaluations;  // in grid order
  TailSums tails;
};

struct SearchOptions {
  int N0 = 1;
  int N_max = 8, M_max = 32;
  std::vector<cplx> K_targets, L_targets;
  CertificateParams params;
  int tail_cutoff = kDefaultTailCutoff;
};

/// Grid order: increasing N + M, then N. Stops at the first feasible pair. N_max
/// below N0 + 1 is raised to N0 + 1.
/// Throws KalmanError if the reduced model at N0 is not controllable/observable.
SearchResult search_NM(const PlantConfig& cfg, const MeasurementSpec& spec,
                       const SearchOptions& opts);
/// Same, reusing a catalog covering N_max and M_max, and its tail table.
SearchResult search_NM(const ModalCatalog& cat, const TailTable& tails, const SearchOptions& opts);

nlohmann::json to_json(const GainSet& g);
nlohmann::json to_json(const Certificate& c);
nlohmann::json to_json(const SearchResult& r);
/// Inverse of to_json(GainSet); targets are optional.
GainSet gains_from_json(const nlohmann::json& j);

}  // namespace wavecascade
