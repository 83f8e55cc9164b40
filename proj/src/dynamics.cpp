#include "saddlelab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "saddlelab/errors.hpp"

namespace saddlelab {

DecomposedTrajectory decompose(const Trajectory& traj, const Manifold& m) {
  if (m.ambient_dim() != traj.x.rows()) throw precondition_error("decompose: manifold dimension mismatch");
  DecomposedTrajectory out;
  out.source = &traj;
  out.manifold = m;
  out.length = traj.exit_index ? *traj.exit_index : traj.x.cols();
  out.y.resize(traj.x.rows(), out.length);
  out.z.resize(traj.x.rows(), out.length);
  for (std::int64_t n = 0; n < out.length; ++n) {
    out.y.col(n) = m.project(traj.x.col(n));
    out.z.col(n) = traj.x.col(n) - out.y.col(n);
  }
  return out;
}

namespace {

Vector clamp_to_ball(const Vector& x, const Vector& center, double r) {
  const Vector off = x - center;
  const double n = off.norm();
  if (n <= r) return x;
  return center + (r / n) * off;
}

// Central-difference Jacobian of the projection map.
Matrix projection_jacobian(const Manifold& m, const Vector& x) {
  const int d = m.ambient_dim();
  const double h = std::max(1e-6, 1e-6 * x.norm());
  Matrix j(d, d);
  for (int i = 0; i < d; ++i) {
    const Vector e = Vector::Unit(d, i) * h;
    j.col(i) = (m.project(x + e) - m.project(x - e)) / (2.0 * h);
  }
  return j;
}

}  // namespace

drift_oracle manifold_drift(const PiecewiseSmoothFunction& f, const Manifold& m,
                            const Vector& x_star, double r) {
  const vector_field grad = smooth_representative_gradient(f);
  if (m.type() == Manifold::kind::affine) {
    const Matrix p = span_projector(m.tangent_basis());
    return [=](const Vector& x) {
      return Vector(p * grad(m.project(clamp_to_ball(x, x_star, r))));
    };
  }
  return [=](const Vector& x) {
    const Vector xc = clamp_to_ball(x, x_star, r);
    return Vector(projection_jacobian(m, xc).transpose() * grad(m.project(xc)));
  };
}

ResidualSeries robbins_monro_residuals(const DecomposedTrajectory& dec, const drift_oracle& drift) {
  if (dec.source == nullptr) throw precondition_error("residuals: decomposition has no source trajectory");
  const Trajectory& t = *dec.source;
  const Manifold& m = dec.manifold;
  const bool linear = m.type() == Manifold::kind::affine;
  const std::int64_t steps = std::max<std::int64_t>(0, dec.length - 1);
  const Eigen::Index d = t.x.rows();

  ResidualSeries out;
  out.eta_tilde.resize(d, steps);
  out.rho.resize(d, steps);
  out.rho_tilde.resize(d, steps);
  out.gamma.resize(static_cast<std::size_t>(steps));
  for (std::int64_t n = 0; n < steps; ++n) {
    const double g = t.gamma[static_cast<std::size_t>(n)];
    const Vector eta = t.eta.col(n + 1);
    const Vector y = dec.y.col(n);
    const Vector y_next = dec.y.col(n + 1);
    const Vector dy = y_next - y;
    const Vector d_y = drift(y);

    const Vector eta_tilde = tangent_projector(m, y).matrix * eta;
    // The projection is affine for affine M, so its Taylor remainder vanishes
    // identically; evaluating it numerically would only return roundoff.
    Vector rho = Vector::Zero(d);
    if (!linear) {
      const Vector x = t.x.col(n);
      const Vector x_next = t.x.col(n + 1);
      rho = (dy - projection_jacobian(m, x) * (x_next - x)) / g;
    }
    const Vector rho_tilde = dy / g + d_y - eta_tilde - rho;

    out.eta_tilde.col(n) = eta_tilde;
    out.rho.col(n) = rho;
    out.rho_tilde.col(n) = rho_tilde;
    out.gamma[static_cast<std::size_t>(n)] = g;

    const Vector rebuilt = g * (-d_y + eta_tilde + rho + rho_tilde);
    out.max_reconstruction_error =
        std::max(out.max_reconstruction_error, (rebuilt - dy).cwiseAbs().maxCoeff());

    const double en = eta.norm();
    out.c_rho = std::max(out.c_rho, rho.norm() / (g * (1.0 + en * en)));
    const double num = rho_tilde.norm();
    const double den = dec.z.col(n).norm() * (1.0 + en);
    double ratio = 0.0;
    if (den > 0.0)
      ratio = num / den;
    else if (num > 0.0)
      ratio = std::numeric_limits<double>::infinity();
    out.c_rho_tilde = std::max(out.c_rho_tilde, ratio);
  }
  return out;
}

DriftReport drift_probe(const PiecewiseSmoothFunction& f, const Manifold& m,
                        const std::vector<Vector>& x_grid, const std::vector<double>& gamma_grid,
                        const NoiseModel& noise, const drift_options& opts) {
  if (!(opts.beta > 0))
    throw angle_condition_fails("drift_probe: the angle constant must be positive");
  if (opts.n_mc < 1) throw precondition_error("drift_probe: need at least one replica");
  if (x_grid.empty() || gamma_grid.empty()) throw precondition_error("drift_probe: empty probe grid");

  const std::size_t n_probes = x_grid.size() * gamma_grid.size();
  const auto n_mc = static_cast<std::size_t>(opts.n_mc);
  std::vector<Vector> subgradients(x_grid.size());
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    rng_t rng = substream(opts.seed ^ 0xd1f7ULL, i);
    subgradients[i] = select_subgradient(f, x_grid[i], opts.rule, &rng);
  }

  std::vector<double> z2(n_probes * n_mc);
  for_each_index(n_probes * n_mc, [&](std::size_t k) {
    const std::size_t probe = k / n_mc;
    const Vector& x = x_grid[probe / gamma_grid.size()];
    const double g = gamma_grid[probe % gamma_grid.size()];
    rng_t rng = substream(opts.seed, k);
    const Vector eta = noise.sample(static_cast<int>(x.size()), rng);
    Vector next(x.size());
    sgd_step(x, g, subgradients[probe / gamma_grid.size()], eta, next);
    z2[k] = (next - m.project(next)).squaredNorm();
  }, opts.exec);

  DriftReport rep;
  rep.beta = opts.beta;
  rep.user_c = opts.user_c;
  rep.n_mc = opts.n_mc;
  rep.seed = opts.seed;
  rep.fitted_c = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < n_probes; ++p) {
    drift_probe_point pt;
    pt.x = x_grid[p / gamma_grid.size()];
    pt.gamma = gamma_grid[p % gamma_grid.size()];
    pt.z_norm = (pt.x - m.project(pt.x)).norm();
    double sum = 0.0;
    for (std::size_t j = 0; j < n_mc; ++j) sum += z2[p * n_mc + j];
    pt.lhs = sum / static_cast<double>(n_mc);
    const double base = pt.z_norm * pt.z_norm - pt.gamma * opts.beta * pt.z_norm;
    pt.bound = base + opts.user_c * pt.gamma * pt.gamma;
    pt.fitted_c = (pt.lhs - base) / (pt.gamma * pt.gamma);
    pt.violated = pt.lhs > pt.bound;
    rep.violations += pt.violated ? 1 : 0;
    rep.fitted_c = std::max(rep.fitted_c, pt.fitted_c);
    rep.probes.push_back(std::move(pt));
  }
  return rep;
}

double largest_clean_radius(const DriftReport& report) {
  double first_bad = std::numeric_limits<double>::infinity();
  for (const auto& p : report.probes)
    if (p.violated) first_bad = std::min(first_bad, p.z_norm);
  double best = 0.0;
  for (const auto& p : report.probes)
    if (p.z_norm < first_bad) best = std::max(best, p.z_norm);
  return best;
}

EnsembleSeries ensemble_z_series(const SGDConfig& cfg, int n_runs, execution exec) {
  if (n_runs < 1) throw precondition_error("ensemble: need at least one run");
  if (!cfg.manifold) throw precondition_error("ensemble: the configuration has no manifold");
  cfg.validate();
  const auto len = static_cast<std::size_t>(cfg.horizon + 1);
  EnsembleSeries out;
  out.schedule = cfg.schedule;
  out.horizon = cfg.horizon;
  out.n_runs = n_runs;
  out.mean_z.assign(len, 0.0);
  out.mean_z2.assign(len, 0.0);

  // Runs are simulated a block at a time and added in run order, so the sums
  // do not depend on how many workers computed the block.
  const std::size_t block = 16;
  std::vector<std::vector<double>> z(block, std::vector<double>(len));
  for (std::size_t first = 0; first < static_cast<std::size_t>(n_runs); first += block) {
    const std::size_t count = std::min(block, static_cast<std::size_t>(n_runs) - first);
    for_each_index(count, [&](std::size_t b) {
      auto& series = z[b];
      std::fill(series.begin(), series.end(), 0.0);
      const Manifold& m = *cfg.manifold;
      bool inside = (cfg.x0 - cfg.x_star).norm() <= cfg.radius;
      if (inside) series[0] = manifold_distance(m, cfg.x0);
      drive_sgd(cfg, cfg.master_seed + first + b, [&](const step_view& s) {
        if (!inside) return;
        if ((s.x_next - cfg.x_star).norm() > cfg.radius) {
          inside = false;
          return;
        }
        series[static_cast<std::size_t>(s.n + 1)] = manifold_distance(m, s.x_next);
      });
    }, exec);
    for (std::size_t b = 0; b < count; ++b)
      for (std::size_t n = 0; n < len; ++n) {
        out.mean_z[n] += z[b][n];
        out.mean_z2[n] += z[b][n] * z[b][n];
      }
  }
  for (std::size_t n = 0; n < len; ++n) {
    out.mean_z[n] /= n_runs;
    out.mean_z2[n] /= n_runs;
  }
  return out;
}

EnsembleSeries constant_series(const StepSchedule& s, std::int64_t horizon, double value) {
  EnsembleSeries out;
  out.schedule = s;
  out.horizon = horizon;
  out.n_runs = 1;
  out.mean_z.assign(static_cast<std::size_t>(horizon + 1), value);
  out.mean_z2.assign(static_cast<std::size_t>(horizon + 1), value * value);
  return out;
}

RateReport rate_diagnostic(const EnsembleSeries& e, double a,
                           const std::vector<std::int64_t>& checkpoints) {
  const double upper = 2.0 * e.schedule.alpha() - 1.0;
  if (!(a > 0.0 && a < upper))
    throw invalid_exponent("rate_diagnostic: the exponent must lie in (0, 2 alpha - 1)");
  if (checkpoints.empty()) throw precondition_error("rate_diagnostic: no checkpoints");
  RateReport rep;
  rep.a = a;
  for (auto n : checkpoints) {
    if (n < 1 || n > e.horizon) throw precondition_error("rate_diagnostic: checkpoint outside the run");
    rep.series.push_back({n, std::pow(static_cast<double>(n), a) * e.mean_z2[static_cast<std::size_t>(n)]});
  }
  rep.decreasing = rep.series.back().value < rep.series.front().value;
  return rep;
}

TailReport weighted_tail_diagnostic(const EnsembleSeries& e, const std::vector<std::int64_t>& grid) {
  if (grid.empty()) throw precondition_error("weighted_tail: empty grid");
  TailReport rep;
  for (auto n : grid) {
    if (n < 1 || n >= e.horizon) throw precondition_error("weighted_tail: grid point outside the run");
    double sum = 0.0;
    for (std::int64_t i = e.horizon; i >= n; --i)
      sum += e.schedule.gamma(i) * e.mean_z[static_cast<std::size_t>(i)];
    rep.series.push_back({n, sum / std::sqrt(chi(e.schedule, n))});
  }
  rep.decreasing = rep.increasing = rep.series.size() > 1;
  for (std::size_t i = 1; i < rep.series.size(); ++i) {
    if (!(rep.series[i].value < rep.series[i - 1].value)) rep.decreasing = false;
    if (!(rep.series[i].value > rep.series[i - 1].value)) rep.increasing = false;
  }
  return rep;
}

}  // namespace saddlelab
