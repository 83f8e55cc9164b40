#include "saddlelab/sgd.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "saddlelab/errors.hpp"
#include "saddlelab/hull.hpp"

namespace saddlelab {

StepSchedule::StepSchedule(double c, double alpha) : c_(c), alpha_(alpha) {
  if (!(c > 0) || !std::isfinite(c)) throw precondition_error("step schedule: c must be positive");
  if (!(alpha > 0.5 && alpha <= 1.0))
    throw precondition_error("step schedule: alpha must lie in (0.5, 1]");
}

double StepSchedule::gamma(std::int64_t n) const {
  if (n < 1) throw precondition_error("gamma: index starts at 1");
  return c_ / std::pow(static_cast<double>(n), alpha_);
}

double gamma(const StepSchedule& s, std::int64_t n) { return s.gamma(n); }

double chi(double c, double alpha, std::int64_t n) {
  if (n < 1) throw precondition_error("chi: index starts at 1");
  if (!(alpha > 0.5)) throw divergent_chi("chi: the squared steps are not summable for alpha <= 1/2");
  // Partial sum up to n_tail, then the integral tail taken from n_tail - 1/2
  // (midpoint rule), which leaves an O(n_tail^(-2 alpha - 2)) error.
  const std::int64_t n_tail = n + 20000;
  const double p = 2.0 * alpha;
  double partial = 0.0;
  for (std::int64_t i = n_tail - 1; i >= n; --i) partial += c * c / std::pow(static_cast<double>(i), p);
  const double tail = c * c / ((p - 1.0) * std::pow(static_cast<double>(n_tail) - 0.5, p - 1.0));
  return partial + tail;
}

double chi(const StepSchedule& s, std::int64_t n) { return chi(s.c(), s.alpha(), n); }

std::vector<double> chi_table(const StepSchedule& s, std::int64_t last) {
  if (last < 1) throw precondition_error("chi_table: need last >= 1");
  std::vector<double> out(static_cast<std::size_t>(last + 1), std::numeric_limits<double>::quiet_NaN());
  out[static_cast<std::size_t>(last)] = chi(s, last);
  for (std::int64_t n = last - 1; n >= 1; --n) {
    const double g = s.gamma(n);
    out[static_cast<std::size_t>(n)] = out[static_cast<std::size_t>(n + 1)] + g * g;
  }
  return out;
}

// ---------------------------------------------------------------------------
// noise

NoiseModel NoiseModel::zero() { return NoiseModel(); }

NoiseModel NoiseModel::sphere_uniform(double sigma) {
  if (!(sigma >= 0)) throw precondition_error("sphere noise: sigma must be non-negative");
  NoiseModel m;
  m.kind_ = kind::sphere_uniform;
  m.sigma_ = sigma;
  return m;
}

NoiseModel NoiseModel::trunc_gaussian(double sigma, double bound) {
  if (!(sigma > 0)) throw precondition_error("truncated gaussian: sigma must be positive");
  if (!(bound >= 0.1 * sigma)) throw precondition_error("truncated gaussian: bound must be at least sigma / 10");
  NoiseModel m;
  m.kind_ = kind::trunc_gaussian;
  m.sigma_ = sigma;
  m.bound_ = bound;
  return m;
}

NoiseModel NoiseModel::rademacher(double sigma) {
  if (!(sigma >= 0)) throw precondition_error("rademacher noise: sigma must be non-negative");
  NoiseModel m;
  m.kind_ = kind::rademacher;
  m.sigma_ = sigma;
  return m;
}

NoiseModel NoiseModel::subspace_restricted(const NoiseModel& inner, const Matrix& basis) {
  NoiseModel m;
  m.kind_ = kind::subspace_restricted;
  m.basis_ = orthonormal_span(basis);
  m.inner_ = std::make_shared<const NoiseModel>(inner);
  return m;
}

double NoiseModel::sigma() const {
  return kind_ == kind::subspace_restricted ? inner_->sigma() : sigma_;
}

void NoiseModel::sample(rng_t& rng, Eigen::Ref<Vector> out) const {
  const Eigen::Index d = out.size();
  switch (kind_) {
    case kind::zero:
      out.setZero();
      return;
    case kind::sphere_uniform: {
      std::normal_distribution<double> normal(0.0, 1.0);
      double n = 0.0;
      do {
        for (Eigen::Index i = 0; i < d; ++i) out(i) = normal(rng);
        n = out.norm();
      } while (n == 0.0);
      out *= sigma_ / n;
      return;
    }
    case kind::trunc_gaussian: {
      std::normal_distribution<double> normal(0.0, sigma_);
      for (Eigen::Index i = 0; i < d; ++i) {
        double v = 0.0;
        do v = normal(rng); while (std::abs(v) > bound_);
        out(i) = v;
      }
      return;
    }
    case kind::rademacher: {
      std::bernoulli_distribution coin(0.5);
      for (Eigen::Index i = 0; i < d; ++i) out(i) = coin(rng) ? sigma_ : -sigma_;
      return;
    }
    case kind::subspace_restricted: {
      if (basis_.rows() != d) throw precondition_error("restricted noise: basis dimension mismatch");
      Vector inner(basis_.cols());
      inner_->sample(rng, inner);
      out.noalias() = basis_ * inner;
      return;
    }
  }
}

Vector NoiseModel::sample(int d, rng_t& rng) const {
  Vector out(d);
  sample(rng, out);
  return out;
}

double NoiseModel::fourth_moment_bound(int d) const {
  const double dd = d;
  switch (kind_) {
    case kind::zero: return 0.0;
    case kind::sphere_uniform: return std::pow(sigma_, 4);
    case kind::trunc_gaussian:
      return std::min((dd * dd + 2.0 * dd) * std::pow(sigma_, 4), dd * dd * std::pow(bound_, 4));
    case kind::rademacher: return dd * dd * std::pow(sigma_, 4);
    case kind::subspace_restricted: return inner_->fourth_moment_bound(static_cast<int>(basis_.cols()));
  }
  return 0.0;
}

std::string to_string(NoiseModel::kind k) {
  switch (k) {
    case NoiseModel::kind::zero: return "zero";
    case NoiseModel::kind::sphere_uniform: return "sphere";
    case NoiseModel::kind::trunc_gaussian: return "gaussian";
    case NoiseModel::kind::rademacher: return "rademacher";
    case NoiseModel::kind::subspace_restricted: return "restricted";
  }
  return "unknown";
}

Vector sample_noise(const NoiseModel& model, int d, rng_t& rng, const Matrix& e_minus,
                    double* minus_norm) {
  Vector eta = model.sample(d, rng);
  if (minus_norm != nullptr) {
    const Matrix q = orthonormal_span(e_minus);
    *minus_norm = (q.transpose() * eta).norm();
  }
  return eta;
}

// ---------------------------------------------------------------------------
// recursion

void SGDConfig::validate() const {
  const int d = f.dim();
  std::ostringstream problems;
  if (x0.size() != d) problems << " x0 dimension does not match the function;";
  if (x_star.size() != d) problems << " x_star dimension does not match the function;";
  if (manifold && manifold->ambient_dim() != d) problems << " manifold dimension does not match;";
  if (!(radius > 0)) problems << " radius must be positive;";
  if (horizon < 1) problems << " horizon must be at least 1;";
  const std::string msg = problems.str();
  if (!msg.empty()) throw precondition_error("sgd config:" + msg);
}

namespace {

// Subgradient choice without the allocations of the general-purpose API.
struct chooser {
  std::vector<int> active;
  Matrix generators;

  void operator()(const PiecewiseSmoothFunction& f, const Vector& x, selection_rule rule,
                  rng_t& rng, Vector& out) {
    active.clear();
    const auto& pieces = f.pieces();
    for (std::size_t i = 0; i < pieces.size(); ++i)
      if (pieces[i].region.contains(x)) active.push_back(static_cast<int>(i));
    if (active.empty()) throw malformed_function("sgd: no region covers the iterate");
    if (active.size() == 1 || rule == selection_rule::active_piece) {
      pieces[static_cast<std::size_t>(active.front())].piece.gradient(x, out);
      return;
    }
    if (rule == selection_rule::random_vertex) {
      std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);
      pieces[static_cast<std::size_t>(active[pick(rng)])].piece.gradient(x, out);
      return;
    }
    generators.resize(x.size(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t c = 0; c < active.size(); ++c)
      generators.col(static_cast<Eigen::Index>(c)) =
          pieces[static_cast<std::size_t>(active[c])].piece.gradient(x);
    out = min_norm_point(generators).point;
  }
};

}  // namespace

bool drive_sgd(const SGDConfig& cfg, std::uint64_t seed,
               const std::function<void(const step_view&)>& on_step) {
  cfg.validate();
  const int d = cfg.f.dim();
  rng_t rng = substream(seed, 0);
  chooser choose;
  Vector x = cfg.x0;
  Vector v(d), eta(d), next(d);
  for (std::int64_t n = 0; n < cfg.horizon; ++n) {
    const double g = cfg.schedule.gamma(n + 1);
    choose(cfg.f, x, cfg.rule, rng, v);
    cfg.noise.sample(rng, eta);
    sgd_step(x, g, v, eta, next);
    if (!next.allFinite()) return false;
    on_step(step_view{n, x, v, eta, g, next});
    x.swap(next);
  }
  return true;
}

Trajectory run_sgd(const SGDConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int d = cfg.f.dim();
  const auto steps = cfg.horizon;
  Trajectory t;
  t.seed = seed;
  t.x = Matrix::Zero(d, steps + 1);
  t.v = Matrix::Zero(d, steps);
  t.eta = Matrix::Zero(d, steps + 1);
  t.gamma.reserve(static_cast<std::size_t>(steps));
  t.f.reserve(static_cast<std::size_t>(steps + 1));
  t.dist_m.reserve(static_cast<std::size_t>(steps + 1));
  const double nan = std::numeric_limits<double>::quiet_NaN();

  auto record_point = [&](std::int64_t n, const Vector& x) {
    t.x.col(n) = x;
    t.f.push_back(evaluate(cfg.f, x));
    if (!t.exit_index && (x - cfg.x_star).norm() > cfg.radius) t.exit_index = n;
    t.dist_m.push_back(!t.exit_index && cfg.manifold ? manifold_distance(*cfg.manifold, x) : nan);
  };
  record_point(0, cfg.x0);
  const bool finished = drive_sgd(cfg, seed, [&](const step_view& s) {
    t.v.col(s.n) = s.v;
    t.eta.col(s.n + 1) = s.eta;
    t.gamma.push_back(s.gamma);
    record_point(s.n + 1, s.x_next);
  });
  const auto done = static_cast<std::int64_t>(t.gamma.size());
  if (!finished) {
    t.diverged = true;
    t.x.conservativeResize(Eigen::NoChange, done + 1);
    t.v.conservativeResize(Eigen::NoChange, done);
    t.eta.conservativeResize(Eigen::NoChange, done + 1);
  }
  t.last_finite = done;
  return t;
}

std::string to_string(run_outcome o) {
  switch (o) {
    case run_outcome::escaped: return "escaped";
    case run_outcome::at_saddle: return "at_saddle";
    case run_outcome::other: return "other";
  }
  return "unknown";
}

double default_saddle_tolerance(const SGDConfig& cfg) {
  if (cfg.saddle_tolerance > 0) return cfg.saddle_tolerance;
  const double lipschitz = cfg.f.lipschitz_bound_on(cfg.x_star, cfg.radius);
  return 2.0 * cfg.schedule.gamma(cfg.horizon) * (lipschitz + cfg.noise.sigma());
}

run_summary summarize_run(const SGDConfig& cfg, std::int64_t run, double saddle_tolerance) {
  run_summary s;
  s.run = run;
  s.seed = cfg.master_seed + static_cast<std::uint64_t>(run);
  const std::int64_t tail_start = cfg.horizon - cfg.horizon / 10;
  double tail_sum = 0.0;
  std::int64_t tail_count = 0;
  Vector last = cfg.x0;
  if ((cfg.x0 - cfg.x_star).norm() > cfg.radius) s.exit_index = 0;
  const bool finished = drive_sgd(cfg, s.seed, [&](const step_view& v) {
    const std::int64_t n = v.n + 1;
    if (!s.exit_index && (v.x_next - cfg.x_star).norm() > cfg.radius) s.exit_index = n;
    if (n >= tail_start && cfg.manifold) {
      tail_sum += manifold_distance(*cfg.manifold, v.x_next);
      ++tail_count;
    }
    if (n == cfg.horizon) last = v.x_next;
  });
  s.diverged = !finished;
  if (s.diverged) {
    s.outcome = run_outcome::escaped;
    s.final_x = Vector::Constant(cfg.f.dim(), std::numeric_limits<double>::infinity());
    s.final_f = std::numeric_limits<double>::quiet_NaN();
    s.final_distance = std::numeric_limits<double>::infinity();
    s.tail_mean_dist = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.final_x = last;
  s.final_f = evaluate(cfg.f, last);
  s.final_distance = (last - cfg.x_star).norm();
  s.tail_mean_dist = tail_count > 0 ? tail_sum / static_cast<double>(tail_count)
                                    : std::numeric_limits<double>::quiet_NaN();
  if (s.final_distance > cfg.radius)
    s.outcome = run_outcome::escaped;
  else if (s.final_distance <= saddle_tolerance &&
           (!cfg.manifold || s.tail_mean_dist <= saddle_tolerance))
    s.outcome = run_outcome::at_saddle;
  else
    s.outcome = run_outcome::other;
  return s;
}

EscapeStats monte_carlo(const SGDConfig& cfg, int n_runs, execution exec) {
  if (n_runs < 1) throw precondition_error("monte_carlo: need at least one run");
  cfg.validate();
  EscapeStats stats;
  stats.n_runs = n_runs;
  stats.saddle_tolerance = default_saddle_tolerance(cfg);
  stats.runs.resize(static_cast<std::size_t>(n_runs));
  for_each_index(stats.runs.size(), [&](std::size_t i) {
    stats.runs[i] = summarize_run(cfg, static_cast<std::int64_t>(i), stats.saddle_tolerance);
  }, exec);

  int escaped = 0, at_saddle = 0, other = 0, finite = 0;
  double f_sum = 0.0;
  for (const auto& r : stats.runs) {
    switch (r.outcome) {
      case run_outcome::escaped: ++escaped; break;
      case run_outcome::at_saddle: ++at_saddle; break;
      case run_outcome::other: ++other; break;
    }
    if (std::isfinite(r.final_f)) {
      f_sum += r.final_f;
      ++finite;
    }
  }
  stats.fraction_escaped = static_cast<double>(escaped) / n_runs;
  stats.fraction_at_saddle = static_cast<double>(at_saddle) / n_runs;
  stats.fraction_other = static_cast<double>(other) / n_runs;
  stats.mean_final_f = finite > 0 ? f_sum / finite : std::numeric_limits<double>::quiet_NaN();
  return stats;
}

}  // namespace saddlelab
