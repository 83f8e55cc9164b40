#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "saddlelab/functions.hpp"
#include "saddlelab/geometry.hpp"
#include "saddlelab/parallel.hpp"
#include "saddlelab/random.hpp"

namespace saddlelab {

/// gamma_n = c / n^alpha with alpha in (1/2, 1].
class StepSchedule {
 public:
  StepSchedule() = default;
  StepSchedule(double c, double alpha);

  double c() const { return c_; }
  double alpha() const { return alpha_; }
  double gamma(std::int64_t n) const;

 private:
  double c_ = 1.0;
  double alpha_ = 1.0;
};

double gamma(const StepSchedule& s, std::int64_t n);

/// Tail sum of squared steps from n on. Any alpha <= 1/2 diverges.
double chi(double c, double alpha, std::int64_t n);
double chi(const StepSchedule& s, std::int64_t n);

/// chi_n for n = 1..last; entry 0 is unused.
std::vector<double> chi_table(const StepSchedule& s, std::int64_t last);

class NoiseModel {
 public:
  enum class kind { zero, sphere_uniform, trunc_gaussian, rademacher, subspace_restricted };

  static NoiseModel zero();
  /// Uniform on the sphere of radius sigma.
  static NoiseModel sphere_uniform(double sigma);
  /// Independent N(0, sigma^2) coordinates conditioned on |eta_i| <= bound.
  static NoiseModel trunc_gaussian(double sigma, double bound);
  /// Independent +-sigma coordinates.
  static NoiseModel rademacher(double sigma);
  /// inner drawn in the coordinates of an orthonormalized `basis`, mapped
  /// into its span.
  static NoiseModel subspace_restricted(const NoiseModel& inner, const Matrix& basis);

  kind type() const { return kind_; }
  double sigma() const;
  double bound() const { return bound_; }
  const Matrix& basis() const { return basis_; }
  const NoiseModel* inner() const { return inner_.get(); }

  void sample(rng_t& rng, Eigen::Ref<Vector> out) const;
  Vector sample(int d, rng_t& rng) const;
  /// Closed-form bound on E|eta|^4 in dimension d.
  double fourth_moment_bound(int d) const;

 private:
  kind kind_ = kind::zero;
  double sigma_ = 0.0;
  double bound_ = 0.0;
  Matrix basis_;
  std::shared_ptr<const NoiseModel> inner_;
};

std::string to_string(NoiseModel::kind k);

/// Draw from `model`; also returns |projection onto span(e_minus)| through
/// `minus_norm` when non-null.
Vector sample_noise(const NoiseModel& model, int d, rng_t& rng, const Matrix& e_minus,
                    double* minus_norm = nullptr);

struct SGDConfig {
  PiecewiseSmoothFunction f;
  std::optional<Manifold> manifold;
  Vector x_star;
  Vector x0;
  StepSchedule schedule;
  NoiseModel noise;
  selection_rule rule = selection_rule::min_norm;
  std::int64_t horizon = 1000;
  double radius = 1.0;
  std::uint64_t master_seed = 0;
  /// Radius of the "converged to the saddle" ball; <= 0 selects the default
  /// 2 gamma_N (L + sigma).
  double saddle_tolerance = 0.0;

  void validate() const;
};

/// Iterate n (column n, 0-based) steps to n + 1 with gamma[n] = gamma_{n+1}:
///   x_{n+1} = x_n - gamma[n] v_n + gamma[n] eta_{n+1}.
struct Trajectory {
  Matrix x;                   // d x (steps + 1)
  Matrix v;                   // d x steps
  Matrix eta;                 // d x (steps + 1), column 0 unused (zero)
  std::vector<double> gamma;  // steps
  std::vector<double> f;      // steps + 1
  std::vector<double> dist_m; // steps + 1, NaN once outside B(x_star, r)
  std::optional<std::int64_t> exit_index;
  bool diverged = false;
  std::int64_t last_finite = 0;
  std::uint64_t seed = 0;

  std::int64_t steps() const { return static_cast<std::int64_t>(gamma.size()); }
};

/// One step of the recursion, coordinate by coordinate in a fixed order so
/// stored trajectories can be replayed bit for bit.
inline void sgd_step(const Vector& x, double g, const Vector& v, const Vector& eta,
                     Eigen::Ref<Vector> out) {
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = x(i) - g * v(i) + g * eta(i);
}

struct step_view {
  std::int64_t n;
  const Vector& x;
  const Vector& v;
  const Vector& eta;
  double gamma;
  const Vector& x_next;
};

/// Runs the recursion for cfg.horizon steps from cfg.x0 with randomness drawn
/// from `seed`. Stops early, returning false, if an iterate overflows.
bool drive_sgd(const SGDConfig& cfg, std::uint64_t seed,
               const std::function<void(const step_view&)>& on_step);

Trajectory run_sgd(const SGDConfig& cfg, std::uint64_t seed);

enum class run_outcome { escaped, at_saddle, other };
std::string to_string(run_outcome o);

struct run_summary {
  std::int64_t run = 0;
  std::uint64_t seed = 0;
  run_outcome outcome = run_outcome::other;
  Vector final_x;
  double final_f = 0.0;
  double final_distance = 0.0;  // |x_N - x_star|
  double tail_mean_dist = 0.0;  // mean dist(x_n, M) over the last decile
  std::optional<std::int64_t> exit_index;
  bool diverged = false;
};

struct EscapeStats {
  int n_runs = 0;
  double fraction_escaped = 0.0;
  double fraction_at_saddle = 0.0;
  double fraction_other = 0.0;
  double mean_final_f = 0.0;
  double saddle_tolerance = 0.0;
  std::vector<run_summary> runs;
};

double default_saddle_tolerance(const SGDConfig& cfg);

run_summary summarize_run(const SGDConfig& cfg, std::int64_t run, double saddle_tolerance);

/// Runs seeds master_seed + i for i < n_runs.
EscapeStats monte_carlo(const SGDConfig& cfg, int n_runs, execution exec = execution::parallel);

}  // namespace saddlelab
