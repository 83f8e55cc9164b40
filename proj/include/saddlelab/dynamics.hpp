#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "saddlelab/functions.hpp"
#include "saddlelab/geometry.hpp"
#include "saddlelab/parallel.hpp"
#include "saddlelab/sgd.hpp"

namespace saddlelab {

/// y_n = P_M(x_n), z_n = x_n - y_n for n < length (the exit index, or the
/// whole run when the iterates never leave the ball).
struct DecomposedTrajectory {
  const Trajectory* source = nullptr;
  Manifold manifold = Manifold::point(Vector::Zero(1));
  Matrix y;
  Matrix z;
  std::int64_t length = 0;
};

DecomposedTrajectory decompose(const Trajectory& traj, const Manifold& m);

using drift_oracle = std::function<Vector(const Vector&)>;

/// Gradient of F o P_M for the smooth representative F of f, evaluated at the
/// point clamped into B(x_star, r).
drift_oracle manifold_drift(const PiecewiseSmoothFunction& f, const Manifold& m,
                            const Vector& x_star, double r);

/// Column n describes the step y_n -> y_{n+1}.
struct ResidualSeries {
  Matrix eta_tilde;
  Matrix rho;
  Matrix rho_tilde;
  std::vector<double> gamma;
  double c_rho = 0.0;
  double c_rho_tilde = 0.0;
  double max_reconstruction_error = 0.0;
};

ResidualSeries robbins_monro_residuals(const DecomposedTrajectory& dec, const drift_oracle& drift);

struct drift_probe_point {
  Vector x;
  double gamma = 0.0;
  double z_norm = 0.0;
  double lhs = 0.0;       // estimated E|z'|^2
  double bound = 0.0;     // |z|^2 - gamma beta |z| + C gamma^2 with the caller's C
  double fitted_c = 0.0;  // smallest C making this probe tight
  bool violated = false;
};

struct DriftReport {
  double beta = 0.0;
  double user_c = 0.0;
  double fitted_c = 0.0;
  int violations = 0;
  int n_mc = 0;
  std::uint64_t seed = 0;
  std::vector<drift_probe_point> probes;
};

struct drift_options {
  double beta = 1.0;
  double user_c = 0.0;
  int n_mc = 10000;
  std::uint64_t seed = 0;
  selection_rule rule = selection_rule::min_norm;
  execution exec = execution::parallel;
};

/// One-step replication of E|z'|^2 from every (x, gamma) in the grid product.
DriftReport drift_probe(const PiecewiseSmoothFunction& f, const Manifold& m,
                        const std::vector<Vector>& x_grid, const std::vector<double>& gamma_grid,
                        const NoiseModel& noise, const drift_options& opts);

/// Largest |z| such that no probe at or below it violates the bound.
double largest_clean_radius(const DriftReport& report);

/// Ensemble means of |z_n| and |z_n|^2 over runs master_seed + i, with z_n
/// taken as zero from the exit index on.
struct EnsembleSeries {
  StepSchedule schedule;
  std::int64_t horizon = 0;
  int n_runs = 0;
  std::vector<double> mean_z;   // index n = 0..horizon
  std::vector<double> mean_z2;
};

EnsembleSeries ensemble_z_series(const SGDConfig& cfg, int n_runs,
                                 execution exec = execution::parallel);

/// Artificial series with |z_n| = value for every n (negative control).
EnsembleSeries constant_series(const StepSchedule& s, std::int64_t horizon, double value);

struct diagnostic_point {
  std::int64_t n = 0;
  double value = 0.0;
};

struct RateReport {
  double a = 0.0;
  std::vector<diagnostic_point> series;
  bool decreasing = false;  // last checkpoint below the first
};

/// n^a mean|z_n|^2 at each checkpoint; a must lie in (0, 2 alpha - 1).
RateReport rate_diagnostic(const EnsembleSeries& e, double a,
                           const std::vector<std::int64_t>& checkpoints);

struct TailReport {
  std::vector<diagnostic_point> series;
  bool decreasing = false;  // strictly decreasing along the grid
  bool increasing = false;  // strictly increasing along the grid
};

/// chi_n^(-1/2) sum_{i=n}^{N} gamma_i mean|z_i| at each grid point. The sum
/// stops at the horizon N, which should lie well past the grid.
TailReport weighted_tail_diagnostic(const EnsembleSeries& e, const std::vector<std::int64_t>& grid);

}  // namespace saddlelab
