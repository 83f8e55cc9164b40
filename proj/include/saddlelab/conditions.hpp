#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "saddlelab/functions.hpp"
#include "saddlelab/geometry.hpp"
#include "saddlelab/parallel.hpp"

namespace saddlelab {

enum class condition_kind { sharpness, angle, verdier, weak_convexity };
enum class verdict { holds, fails, inconclusive };

std::string to_string(condition_kind k);
std::string to_string(verdict v);

/// One sampled ratio. `anchor` is the manifold point of a Verdier pair and
/// empty otherwise.
struct condition_sample {
  Vector x;
  Vector anchor;
  double ratio = 0.0;
};

struct ConditionReport {
  condition_kind kind = condition_kind::sharpness;
  double estimate = 0.0;
  int n_samples = 0;
  double radius = 0.0;
  std::vector<Vector> witness;
  verdict outcome = verdict::inconclusive;
  std::uint64_t seed = 0;
  std::vector<condition_sample> samples;
};

constexpr double sharpness_floor = 1e-6;
constexpr double verdier_stabilization = 1.05;

// Per-point ratios; the estimators below are min / max reductions of these.

/// |min-norm subgradient of f at x|.
double sharpness_ratio(const PiecewiseSmoothFunction& f, const Vector& x);
/// min over generators v of <v, n>/|n| with n = x - P_M(x).
double angle_ratio(const PiecewiseSmoothFunction& f, const Manifold& m, const Vector& x);
/// max over generators v at x of |P_T(y) v - grad_M f(y)| / |x - y|.
double verdier_ratio(const PiecewiseSmoothFunction& f, const Manifold& m,
                     const Vector& x, const Vector& y);

/// Uniform points of B(x_star, r) at distance >= r * 1e-3 from M.
std::vector<Vector> sample_off_manifold(const Manifold& m, const Vector& x_star, double r,
                                        int n, std::uint64_t seed,
                                        execution exec = execution::parallel);

ConditionReport estimate_sharpness(const PiecewiseSmoothFunction& f, const Manifold& m,
                                   const Vector& x_star, double r, int n_samples,
                                   std::uint64_t seed, execution exec = execution::parallel);

/// Sharpness on caller-supplied points (no sampling).
ConditionReport sharpness_on_points(const PiecewiseSmoothFunction& f, const Manifold& m,
                                    const std::vector<Vector>& points, double r,
                                    execution exec = execution::parallel);

ConditionReport estimate_angle_beta(const PiecewiseSmoothFunction& f, const Manifold& m,
                                    const Vector& x_star, double r, int n_samples,
                                    std::uint64_t seed, execution exec = execution::parallel);

ConditionReport angle_on_points(const PiecewiseSmoothFunction& f, const Manifold& m,
                                const std::vector<Vector>& points, double r,
                                execution exec = execution::parallel);

/// Pairs are drawn at log-uniform scales s in [r 1e-4, r]: the anchor y near
/// x_star on M, x in B(y, s). Holds when the pairs in the closest distance
/// decile raise the running maximum by at most 5%.
ConditionReport estimate_verdier_constant(const PiecewiseSmoothFunction& f, const Manifold& m,
                                          const Vector& x_star, double r, int n_pairs,
                                          std::uint64_t seed,
                                          execution exec = execution::parallel);

struct box {
  Vector lower;
  Vector upper;
};

ConditionReport estimate_weak_convexity_rho(const PiecewiseSmoothFunction& f, const box& domain,
                                            const std::vector<double>& rho_grid, int n_segments,
                                            std::uint64_t seed,
                                            execution exec = execution::parallel);

enum class critical_point_class {
  local_min_candidate,
  active_strict_saddle,
  sharply_repulsive,
  other
};

std::string to_string(critical_point_class c);

struct classification {
  critical_point_class kind = critical_point_class::other;
  ConditionReport sharpness;
  ConditionReport angle;
  Vector riemannian_gradient;
  Matrix riemannian_hessian;
  bool minimizes_on_manifold = false;
  bool minimizes_on_ball = false;
};

classification classify_critical_point(const PiecewiseSmoothFunction& f, const Manifold& m,
                                       const Vector& x_star, double r, double tol = 1e-6,
                                       int n_samples = 4000, std::uint64_t seed = 0);

/// Largest deviation over h in [0, T] between z(s) = 1/(s+1) shifted by t and
/// the differential inclusion solution x(h) = z(t) + h.
double apt_gap(double T, double t, int grid_points = 10001);
/// Closed form of apt_gap.
double apt_gap_closed_form(double T, double t);

}  // namespace saddlelab
