#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "saddlelab/linalg.hpp"
#include "saddlelab/parallel.hpp"
#include "saddlelab/sgd.hpp"

namespace saddlelab {

struct SpectralSplit {
  Matrix P;               // columns: real basis of E+ then of E-
  Matrix J_plus;
  Matrix J_minus;
  Matrix E_minus_basis;   // orthonormal
  Matrix E_plus_basis;    // orthonormal
  Eigen::VectorXcd eigenvalues;
  double eigenvector_condition = 0.0;
};

/// Splits J into the block with eigenvalue real parts < -tol_gap and the
/// block with real parts >= 0.
SpectralSplit spectral_split(const Matrix& J, double tol_gap = 1e-8);

struct LyapunovCertificate {
  Matrix Q;
  double residual = 0.0;   // Frobenius norm of Q J + J' Q + 2 I
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

/// Solves Q J + J' Q = -2 I for a stable J through its Kronecker form.
LyapunovCertificate lyapunov_solve(const Matrix& J_minus);

/// coefficient * prod_i u_i^exponents[i], contributing to output `output`.
struct monomial {
  int output = 0;
  double coefficient = 0.0;
  std::vector<int> exponents;
};

class PolynomialMap {
 public:
  PolynomialMap() = default;
  PolynomialMap(int in_dim, int out_dim, std::vector<monomial> terms);

  int in_dim() const { return in_; }
  int out_dim() const { return out_; }
  const std::vector<monomial>& terms() const { return terms_; }

  Vector operator()(const Vector& u) const;
  Matrix jacobian(const Vector& u) const;

 private:
  int in_ = 0;
  int out_ = 0;
  std::vector<monomial> terms_;
};

/// Delta(w) = gain * min(|w|, saturation) * I.
struct DeltaSpec {
  double gain = 0.0;
  double saturation = std::numeric_limits<double>::infinity();
};

/// Drift with a prescribed invariant manifold {y- = G(y+)}. In the
/// coordinates w+ = y+, w- = y- - G(y+) the flow of -D reads
///   dw+/dt = -J+ w+,   dw-/dt = (-J- + Delta(w)) w-.
/// Original coordinates are y = P * (y+, y-).
class ConstructedSystem {
 public:
  int dim() const { return d_plus_ + d_minus_; }
  int d_plus() const { return d_plus_; }
  int d_minus() const { return d_minus_; }
  const Matrix& J_plus() const { return j_plus_; }
  const Matrix& J_minus() const { return j_minus_; }
  const Matrix& P() const { return p_; }
  const PolynomialMap& G() const { return g_; }
  const DeltaSpec& delta_spec() const { return delta_; }
  const LyapunovCertificate& certificate() const { return cert_; }
  /// Orthonormal basis of the unstable directions E- in original coordinates.
  Matrix e_minus_basis() const;
  Matrix e_plus_basis() const;

  Vector to_w(const Vector& y) const;
  Vector from_w(const Vector& w) const;
  Matrix delta(const Vector& w) const;
  Vector drift(const Vector& y) const;

 private:
  friend ConstructedSystem build_system(const Matrix&, const Matrix&, const PolynomialMap&,
                                        const DeltaSpec&, const std::optional<Matrix>&);
  int d_plus_ = 0;
  int d_minus_ = 0;
  Matrix j_plus_, j_minus_, p_, p_inv_;
  PolynomialMap g_;
  DeltaSpec delta_;
  LyapunovCertificate cert_;
};

ConstructedSystem build_system(const Matrix& J_plus, const Matrix& J_minus, const PolynomialMap& G,
                               const DeltaSpec& delta,
                               const std::optional<Matrix>& P = std::nullopt);

/// Integrates dy/dt = -D(y) from on-manifold starts y = from_w((w+, 0)) over
/// [0, t_end] and returns the largest |w-| seen.
double manifold_invariance_defect(const ConstructedSystem& sys, const std::vector<Vector>& w_plus_starts,
                                  double t_end = 1.0);

/// Residual input scale * n^(-decay) * xi_n with xi_n drawn from `shape`.
struct ResidualSpec {
  NoiseModel shape = NoiseModel::zero();
  double scale = 0.0;
  double decay = 1.0;
};

struct AbstractConfig {
  StepSchedule schedule;
  NoiseModel e_noise;            // eta tilde, original coordinates
  ResidualSpec rho;              // rho, decay 1 gives a square-summable series
  ResidualSpec rho_tilde{NoiseModel::zero(), 0.0, 0.75};
  std::int64_t horizon = 1000;   // number of steps
  std::int64_t tau_start = 1;    // N in tau_N(L)
  double L = 0.01;
  Vector y0;
  double escape_radius = 1e6;    // stop once |y| exceeds this
};

/// Iterate n (1-based) steps with gamma_n; chi[n] = chi_n. Column k of the
/// step series describes the step from iterate k + 1.
struct AbstractRun {
  std::vector<double> gamma;   // per step
  std::vector<double> chi;     // per iterate
  Matrix y;                    // d x iterates
  Matrix w;
  std::vector<double> U;
  Matrix e, r, r_tilde;        // d- x steps
  Matrix H;                    // (d- * d-) x steps, column-major blocks
  Matrix eta_tilde, rho, rho_tilde;  // d x steps, original coordinates
  std::optional<std::int64_t> tau;   // iterate index
  bool escaped = false;
  double max_identity_error = 0.0;   // w- recursion rebuilt from (H, e, r, r~)
  std::vector<std::string> contract_flags;
  std::uint64_t seed = 0;

  std::int64_t steps() const { return static_cast<std::int64_t>(gamma.size()); }
};

AbstractRun simulate_abstract(const ConstructedSystem& sys, const AbstractConfig& cfg,
                              std::uint64_t seed);

struct PathwiseReport {
  std::int64_t steps_checked = 0;
  int lower_violations = 0;       // U_{n+1} - U_n >= gamma <a_n, e + r + r~>
  int a_norm_violations = 0;      // |a_n| <= lambda_max / sqrt(lambda_min)
  double max_a_norm = 0.0;
  double a_norm_bound = 0.0;
  std::int64_t below_threshold_steps = 0;  // steps with U_n^2 <= L chi_n
  double fitted_c = 0.0;          // max of (U_{n+1}-U_n)^2 / (gamma^2 (L + |e|^2 + |r|^2 + |r~|^2))
  int upper_violations = 0;       // against the caller's C, when given
  int standing_assumption_violations = 0;  // |Q (H_n + J-)| > 1/2
};

PathwiseReport pathwise_inequality_probe(const AbstractRun& run, const ConstructedSystem& sys,
                                         double L, std::optional<double> user_c = std::nullopt);

struct NonconvergenceStats {
  int n_runs = 0;
  double p_tau_finite = 0.0;
  double p_stays_above = 0.0;   // U_k >= sqrt(L chi_tau) / 2 for all k >= tau
  double p_converges = 0.0;     // max |y_n| over the last decile < epsilon, no escape
  double epsilon = 0.0;
  struct run_record {
    std::uint64_t seed = 0;
    std::optional<std::int64_t> tau;
    bool stays_above = false;
    bool converges = false;
    bool escaped = false;
    double tail_max_y = 0.0;
  };
  std::vector<run_record> runs;
};

NonconvergenceStats nonconvergence_experiment(const ConstructedSystem& sys, const AbstractConfig& cfg,
                                              std::uint64_t master_seed, int n_runs, double epsilon,
                                              execution exec = execution::parallel);

}  // namespace saddlelab
