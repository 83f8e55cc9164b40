#include "saddlelab/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "saddlelab/errors.hpp"
#include "saddlelab/sampling.hpp"

namespace saddlelab {

std::string to_string(condition_kind k) {
  switch (k) {
    case condition_kind::sharpness: return "sharpness";
    case condition_kind::angle: return "angle";
    case condition_kind::verdier: return "verdier";
    case condition_kind::weak_convexity: return "weak_convexity";
  }
  return "unknown";
}

std::string to_string(verdict v) {
  switch (v) {
    case verdict::holds: return "holds";
    case verdict::fails: return "fails";
    case verdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

std::string to_string(critical_point_class c) {
  switch (c) {
    case critical_point_class::local_min_candidate: return "local_min_candidate";
    case critical_point_class::active_strict_saddle: return "active_strict_saddle";
    case critical_point_class::sharply_repulsive: return "sharply_repulsive";
    case critical_point_class::other: return "other";
  }
  return "unknown";
}

double sharpness_ratio(const PiecewiseSmoothFunction& f, const Vector& x) {
  return min_norm_subgradient(f, x).norm();
}

double angle_ratio(const PiecewiseSmoothFunction& f, const Manifold& m, const Vector& x) {
  const Vector n = x - m.project(x);
  const double len = n.norm();
  if (len == 0.0) throw precondition_error("angle_ratio: point lies on the manifold");
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& v : clarke_generators(f, x).generators) worst = std::min(worst, v.dot(n) / len);
  return worst;
}

double verdier_ratio(const PiecewiseSmoothFunction& f, const Manifold& m, const Vector& x,
                     const Vector& y) {
  const double gap = (x - y).norm();
  if (gap == 0.0) throw precondition_error("verdier_ratio: coincident pair");
  const Matrix p = tangent_projector(m, y).matrix;
  const Vector tangential = p * smooth_representative_gradient(f)(y);
  double worst = 0.0;
  for (const auto& v : clarke_generators(f, x).generators)
    worst = std::max(worst, (p * v - tangential).norm() / gap);
  return worst;
}

std::vector<Vector> sample_off_manifold(const Manifold& m, const Vector& x_star, double r, int n,
                                        std::uint64_t seed, execution exec) {
  if (!(r > 0)) throw precondition_error("sampling radius must be positive");
  if (n < 1) throw precondition_error("need at least one sample");
  std::vector<Vector> pts(static_cast<std::size_t>(n));
  const double min_dist = r * 1e-3;
  for_each_index(pts.size(), [&](std::size_t i) {
    rng_t rng = substream(seed, i);
    for (int attempt = 0; attempt < 10000; ++attempt) {
      Vector x = sample_ball(x_star, r, rng);
      if (manifold_distance(m, x) >= min_dist) {
        pts[i] = std::move(x);
        return;
      }
    }
    throw precondition_error("sample_off_manifold: the ball has no room off the manifold");
  }, exec);
  return pts;
}

namespace {

std::vector<double> ratios_on(const std::vector<Vector>& pts,
                              const std::function<double(const Vector&)>& ratio,
                              execution exec) {
  std::vector<double> out(pts.size());
  for_each_index(pts.size(), [&](std::size_t i) { out[i] = ratio(pts[i]); }, exec);
  return out;
}

ConditionReport make_report(condition_kind kind, const std::vector<Vector>& pts,
                            const std::vector<double>& ratios, double r) {
  ConditionReport rep;
  rep.kind = kind;
  rep.radius = r;
  rep.n_samples = static_cast<int>(pts.size());
  rep.samples.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) rep.samples.push_back({pts[i], Vector(), ratios[i]});
  return rep;
}

std::size_t argmin(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

ConditionReport sharpness_on_points(const PiecewiseSmoothFunction& f, const Manifold& m,
                                    const std::vector<Vector>& points, double r,
                                    execution exec) {
  if (points.empty()) throw precondition_error("sharpness: no sample points");
  const auto ratios = ratios_on(points, [&](const Vector& x) { return sharpness_ratio(f, x); }, exec);
  ConditionReport rep = make_report(condition_kind::sharpness, points, ratios, r);
  const std::size_t w = argmin(ratios);
  rep.estimate = ratios[w];
  rep.witness = {points[w]};

  // A gradient that fades toward M shows up as the closest decile being much
  // smaller than the rest, even when every sample stays above the floor.
  std::vector<double> dist(points.size());
  for_each_index(points.size(), [&](std::size_t i) { dist[i] = manifold_distance(m, points[i]); }, exec);
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  const std::size_t near_count = std::max<std::size_t>(1, points.size() / 10);
  double near_min = std::numeric_limits<double>::infinity();
  double far_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < order.size(); ++i) {
    double& slot = i < near_count ? near_min : far_min;
    slot = std::min(slot, ratios[order[i]]);
  }
  const bool fading = std::isfinite(far_min) && near_min < 0.5 * far_min;
  rep.outcome = rep.estimate > sharpness_floor && !fading ? verdict::holds : verdict::fails;
  return rep;
}

ConditionReport estimate_sharpness(const PiecewiseSmoothFunction& f, const Manifold& m,
                                   const Vector& x_star, double r, int n_samples,
                                   std::uint64_t seed, execution exec) {
  ConditionReport rep =
      sharpness_on_points(f, m, sample_off_manifold(m, x_star, r, n_samples, seed, exec), r, exec);
  rep.seed = seed;
  return rep;
}

ConditionReport angle_on_points(const PiecewiseSmoothFunction& f, const Manifold& m,
                                const std::vector<Vector>& points, double r, execution exec) {
  if (points.empty()) throw precondition_error("angle: no sample points");
  const auto ratios = ratios_on(points, [&](const Vector& x) { return angle_ratio(f, m, x); }, exec);
  ConditionReport rep = make_report(condition_kind::angle, points, ratios, r);
  const std::size_t w = argmin(ratios);
  rep.estimate = ratios[w];
  rep.witness = {points[w]};
  rep.outcome = rep.estimate > 0.0 ? verdict::holds : verdict::fails;
  return rep;
}

ConditionReport estimate_angle_beta(const PiecewiseSmoothFunction& f, const Manifold& m,
                                    const Vector& x_star, double r, int n_samples,
                                    std::uint64_t seed, execution exec) {
  ConditionReport rep =
      angle_on_points(f, m, sample_off_manifold(m, x_star, r, n_samples, seed, exec), r, exec);
  rep.seed = seed;
  return rep;
}

ConditionReport estimate_verdier_constant(const PiecewiseSmoothFunction& f, const Manifold& m,
                                          const Vector& x_star, double r, int n_pairs,
                                          std::uint64_t seed, execution exec) {
  if (!(r > 0)) throw precondition_error("verdier: radius must be positive");
  if (n_pairs < 10) throw precondition_error("verdier: need at least 10 pairs");
  const auto n = static_cast<std::size_t>(n_pairs);
  std::vector<Vector> xs(n), ys(n);
  std::vector<double> ratios(n), gaps(n);
  for_each_index(n, [&](std::size_t i) {
    rng_t rng = substream(seed, i);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const double scale = r * std::pow(10.0, -4.0 * unit(rng));
      const Vector y = m.project(sample_ball(x_star, scale, rng));
      if ((y - x_star).norm() > r) continue;
      const Vector x = sample_ball(y, scale, rng);
      if ((x - x_star).norm() > r || (x - y).norm() == 0.0) continue;
      xs[i] = x;
      ys[i] = y;
      gaps[i] = (x - y).norm();
      ratios[i] = verdier_ratio(f, m, x, y);
      return;
    }
    throw precondition_error("verdier: could not draw a pair inside the ball");
  }, exec);

  ConditionReport rep;
  rep.kind = condition_kind::verdier;
  rep.radius = r;
  rep.seed = seed;
  rep.n_samples = n_pairs;
  rep.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) rep.samples.push_back({xs[i], ys[i], ratios[i]});

  const std::size_t w =
      static_cast<std::size_t>(std::max_element(ratios.begin(), ratios.end()) - ratios.begin());
  rep.estimate = ratios[w];
  rep.witness = {xs[w], ys[w]};

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gaps[a] > gaps[b]; });
  const std::size_t head = n - std::max<std::size_t>(1, n / 10);
  double head_max = 0.0;
  for (std::size_t i = 0; i < head; ++i) head_max = std::max(head_max, ratios[order[i]]);
  rep.outcome = rep.estimate <= verdier_stabilization * head_max || rep.estimate == 0.0
                    ? verdict::holds
                    : verdict::fails;
  return rep;
}

ConditionReport estimate_weak_convexity_rho(const PiecewiseSmoothFunction& f, const box& domain,
                                            const std::vector<double>& rho_grid, int n_segments,
                                            std::uint64_t seed, execution exec) {
  if (rho_grid.empty()) throw precondition_error("weak convexity: empty rho grid");
  if (!std::is_sorted(rho_grid.begin(), rho_grid.end()))
    throw precondition_error("weak convexity: rho grid must be ascending");
  if (domain.lower.size() != f.dim() || domain.upper.size() != f.dim())
    throw precondition_error("weak convexity: box dimension mismatch");
  if (n_segments < 1) throw precondition_error("weak convexity: need at least one segment");

  struct segment {
    Vector a, b;
    double t = 0.5;
  };
  const auto n = static_cast<std::size_t>(n_segments);
  const std::size_t g = rho_grid.size();
  std::vector<segment> segs(n);
  std::vector<double> excess(n * g);  // chord violation per (segment, rho)
  for_each_index(n, [&](std::size_t i) {
    rng_t rng = substream(seed, i);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    segment s;
    s.a.resize(f.dim());
    s.b.resize(f.dim());
    for (int j = 0; j < f.dim(); ++j) {
      s.a(j) = domain.lower(j) + (domain.upper(j) - domain.lower(j)) * unit(rng);
      s.b(j) = domain.lower(j) + (domain.upper(j) - domain.lower(j)) * unit(rng);
    }
    s.t = unit(rng);
    const Vector mid = s.t * s.a + (1.0 - s.t) * s.b;
    const double fa = evaluate(f, s.a), fb = evaluate(f, s.b), fm = evaluate(f, mid);
    for (std::size_t k = 0; k < g; ++k) {
      const double rho = rho_grid[k];
      const double ga = fa + rho * s.a.squaredNorm();
      const double gb = fb + rho * s.b.squaredNorm();
      const double gm = fm + rho * mid.squaredNorm();
      excess[i * g + k] = gm - (s.t * ga + (1.0 - s.t) * gb);
    }
    segs[i] = std::move(s);
  }, exec);

  ConditionReport rep;
  rep.kind = condition_kind::weak_convexity;
  rep.n_samples = n_segments;
  rep.seed = seed;
  rep.radius = (domain.upper - domain.lower).norm() / 2.0;
  rep.outcome = verdict::fails;
  rep.estimate = std::numeric_limits<double>::infinity();
  std::size_t worst_seg = 0;
  for (std::size_t k = 0; k < g; ++k) {
    bool ok = true;
    double local_worst = -std::numeric_limits<double>::infinity();
    std::size_t local_seg = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = excess[i * g + k];
      if (e > local_worst) {
        local_worst = e;
        local_seg = i;
      }
      if (e > 1e-12) ok = false;
    }
    worst_seg = local_seg;
    if (ok) {
      rep.estimate = rho_grid[k];
      rep.outcome = verdict::holds;
      break;
    }
  }
  const segment& s = segs[worst_seg];
  rep.witness = {s.a, s.b, Vector(s.t * s.a + (1.0 - s.t) * s.b)};
  rep.samples.reserve(n);
  const std::size_t k_report = rep.outcome == verdict::holds
                                   ? static_cast<std::size_t>(std::find(rho_grid.begin(), rho_grid.end(), rep.estimate) - rho_grid.begin())
                                   : g - 1;
  for (std::size_t i = 0; i < n; ++i)
    rep.samples.push_back({Vector(segs[i].t * segs[i].a + (1.0 - segs[i].t) * segs[i].b), Vector(),
                           excess[i * g + k_report]});
  return rep;
}

classification classify_critical_point(const PiecewiseSmoothFunction& f, const Manifold& m,
                                       const Vector& x_star, double r, double tol, int n_samples,
                                       std::uint64_t seed) {
  if (min_norm_subgradient(f, x_star).norm() > tol)
    throw not_critical("classify_critical_point: 0 is not in the subdifferential at the point");

  classification out;
  out.sharpness = estimate_sharpness(f, m, x_star, r, n_samples, seed);
  out.angle = estimate_angle_beta(f, m, x_star, r, n_samples, seed);
  const bool sharp = out.sharpness.outcome == verdict::holds;
  const vector_field grad = smooth_representative_gradient(f);

  double lambda_min = std::numeric_limits<double>::infinity();
  out.riemannian_gradient = riem_gradient(grad, m, x_star);
  if (m.dim() > 0) {
    out.riemannian_hessian = riem_hessian(grad, m, x_star);
    lambda_min = Eigen::SelfAdjointEigenSolver<Matrix>(out.riemannian_hessian).eigenvalues()(0);
  } else {
    out.riemannian_hessian = Matrix(0, 0);
  }

  const double f_star = evaluate(f, x_star);
  rng_t rng = substream(seed, 0x5eed0001ULL);
  out.minimizes_on_manifold = true;
  out.minimizes_on_ball = true;
  for (int i = 0; i < n_samples; ++i) {
    const Vector x = sample_ball(x_star, r, rng);
    if (evaluate(f, x) < f_star - tol) out.minimizes_on_ball = false;
    const Vector y = m.project(x);
    if ((y - x_star).norm() <= r && evaluate(f, y) < f_star - tol) out.minimizes_on_manifold = false;
  }

  if (sharp && out.riemannian_gradient.norm() <= tol && lambda_min < -tol) {
    out.kind = critical_point_class::active_strict_saddle;
  } else if (sharp && out.minimizes_on_manifold && out.angle.estimate < -tol) {
    out.kind = critical_point_class::sharply_repulsive;
  } else if (out.minimizes_on_ball) {
    out.kind = critical_point_class::local_min_candidate;
  } else {
    out.kind = critical_point_class::other;
  }
  return out;
}

double apt_gap(double T, double t, int grid_points) {
  if (T < 0 || t < 0) throw precondition_error("apt_gap: need T >= 0 and t >= 0");
  if (grid_points < 2) throw precondition_error("apt_gap: grid needs at least two points");
  const double zt = 1.0 / (t + 1.0);
  double gap = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    const double h = i + 1 == grid_points ? T : T * i / (grid_points - 1);
    gap = std::max(gap, std::abs(1.0 / (t + h + 1.0) - (zt + h)));
  }
  return gap;
}

double apt_gap_closed_form(double T, double t) {
  return T + 1.0 / (t + 1.0) - 1.0 / (t + T + 1.0);
}

}  // namespace saddlelab
