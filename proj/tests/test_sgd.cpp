#include <cmath>

#include "doctest.h"
#include "saddlelab/errors.hpp"
#include "saddlelab/hull.hpp"
#include "saddlelab/sgd.hpp"

using namespace saddlelab;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Tail sum of c^2 / i^p for i >= n: direct long double sum to n + 5e5, then
// Euler-Maclaurin for the remainder.
double chi_oracle(double c, double alpha, long n) {
  const long double p = 2.0L * alpha;
  const long last = n + 500000;
  long double s = 0.0L;
  for (long i = last - 1; i >= n; --i) s += 1.0L / std::pow(static_cast<long double>(i), p);
  const long double N = last;
  s += std::pow(N, 1.0L - p) / (p - 1.0L) + 0.5L * std::pow(N, -p) + p / 12.0L * std::pow(N, -p - 1.0L);
  return static_cast<double>(c * c * s);
}

SGDConfig saddle_config() {
  const Problem p = builtin("saddle_abs");
  SGDConfig cfg;
  cfg.f = p.f;
  cfg.manifold = p.manifold;
  cfg.x_star = p.critical_point;
  cfg.x0 = vec({0.0, 0.3});
  cfg.schedule = StepSchedule(0.05, 0.7);
  cfg.noise = NoiseModel::sphere_uniform(0.5);
  cfg.horizon = 3000;
  cfg.radius = 0.5;
  cfg.master_seed = 21;
  return cfg;
}

}  // namespace

TEST_CASE("step schedule") {
  const StepSchedule s(0.05, 0.7);
  CHECK(s.gamma(1) == 0.05);
  CHECK(s.gamma(1000) == doctest::Approx(0.05 / std::pow(1000.0, 0.7)).epsilon(1e-15));
  CHECK_THROWS_AS(StepSchedule(1.0, 0.5), precondition_error);
  CHECK_THROWS_AS(StepSchedule(1.0, 1.1), precondition_error);
  CHECK_THROWS_AS(StepSchedule(0.0, 0.7), precondition_error);
  CHECK_THROWS_AS(s.gamma(0), precondition_error);
}

TEST_CASE("chi against an independent long-double oracle") {
  for (double alpha : {1.0, 0.75, 0.6})
    for (long n : {1L, 10L, 1000L}) {
      const double got = chi(0.5, alpha, n);
      CHECK(got == doctest::Approx(chi_oracle(0.5, alpha, n)).epsilon(1e-10));
    }
  // gamma_n = 1/n: chi_n is close to 1/(n - 1/2).
  CHECK(chi(1.0, 1.0, 10) == doctest::Approx(1.0 / 9.5).epsilon(1e-3));
  CHECK_THROWS_AS(chi(1.0, 0.5, 1), divergent_chi);
  CHECK_THROWS_AS(chi(1.0, 0.4, 1), divergent_chi);
}

TEST_CASE("chi table telescopes") {
  const StepSchedule s(0.3, 0.8);
  const auto t = chi_table(s, 500);
  for (std::int64_t n = 1; n < 500; ++n) {
    const double g = s.gamma(n);
    CHECK(t[static_cast<std::size_t>(n)] - t[static_cast<std::size_t>(n + 1)] == doctest::Approx(g * g).epsilon(1e-9));
  }
  CHECK(t[1] == doctest::Approx(chi(s, 1)).epsilon(1e-13));
}

TEST_CASE("noise models") {
  rng_t rng = substream(4, 0);
  const int d = 3;
  const NoiseModel sphere = NoiseModel::sphere_uniform(0.7);
  const NoiseModel rad = NoiseModel::rademacher(0.2);
  const NoiseModel tg = NoiseModel::trunc_gaussian(1.0, 0.5);
  Matrix basis(3, 1);
  basis << 0.0, 2.0, 0.0;
  const NoiseModel sub = NoiseModel::subspace_restricted(NoiseModel::sphere_uniform(1.0), basis);
  for (int i = 0; i < 1000; ++i) {
    CHECK(sphere.sample(d, rng).norm() == doctest::Approx(0.7).epsilon(1e-14));
    const Vector r = rad.sample(d, rng);
    for (int k = 0; k < d; ++k) CHECK(std::abs(r(k)) == 0.2);
    CHECK(tg.sample(d, rng).cwiseAbs().maxCoeff() <= 0.5);
    const Vector s = sub.sample(d, rng);
    CHECK(s(0) == 0.0);
    CHECK(s(2) == 0.0);
    CHECK(std::abs(s(1)) == doctest::Approx(1.0));
  }
  CHECK(NoiseModel::zero().sample(d, rng).norm() == 0.0);
  CHECK_THROWS_AS(NoiseModel::trunc_gaussian(1.0, 0.05), precondition_error);
}

TEST_CASE("noise is centred and its fourth moment respects the bound") {
  const int d = 2;
  const int n = 200000;
  for (const NoiseModel& m : {NoiseModel::sphere_uniform(0.5), NoiseModel::rademacher(0.5),
                              NoiseModel::trunc_gaussian(0.5, 1.0)}) {
    rng_t rng = substream(12, 0);
    Vector mean = Vector::Zero(d);
    double m4 = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vector e = m.sample(d, rng);
      mean += e;
      m4 += e.squaredNorm() * e.squaredNorm();
    }
    mean /= n;
    m4 /= n;
    CHECK(mean.norm() < 5.0 * 0.5 / std::sqrt(static_cast<double>(n)));
    CHECK(m4 <= m.fourth_moment_bound(d) * (1.0 + 1e-2));
  }
  CHECK(NoiseModel::sphere_uniform(0.5).fourth_moment_bound(4) == doctest::Approx(0.0625));
  CHECK(NoiseModel::rademacher(0.5).fourth_moment_bound(2) == doctest::Approx(4.0 * 0.0625));
}

TEST_CASE("trajectories replay bit for bit") {
  const SGDConfig cfg = saddle_config();
  const Trajectory t = run_sgd(cfg, 5);
  REQUIRE(t.steps() == cfg.horizon);
  Vector next(2);
  for (std::int64_t n = 0; n < t.steps(); ++n) {
    const Vector x = t.x.col(n), v = t.v.col(n), e = t.eta.col(n + 1);
    sgd_step(x, t.gamma[static_cast<std::size_t>(n)], v, e, next);
    if (!(next.array() == t.x.col(n + 1).array()).all()) {
      FAIL("replay differs at step " << n);
    }
  }
  CHECK(t.gamma[0] == cfg.schedule.gamma(1));
}

TEST_CASE("chosen directions are Clarke subgradients") {
  SGDConfig cfg = saddle_config();
  cfg.rule = selection_rule::random_vertex;
  const Trajectory t = run_sgd(cfg, 6);
  for (std::int64_t n = 0; n < t.steps(); ++n) {
    if (!std::isfinite(t.dist_m[static_cast<std::size_t>(n)])) break;
    const Vector x = t.x.col(n);
    const Matrix g = clarke_generators(cfg.f, x).as_columns();
    CHECK(hull_distance(g, t.v.col(n)) < 1e-12);
  }
}

TEST_CASE("distance column is NaN from the exit index on") {
  SGDConfig cfg = saddle_config();
  cfg.horizon = 20000;
  const Trajectory t = run_sgd(cfg, 7);
  REQUIRE(t.exit_index.has_value());
  const auto e = static_cast<std::size_t>(*t.exit_index);
  CHECK((t.x.col(static_cast<Eigen::Index>(e)) - cfg.x_star).norm() > cfg.radius);
  CHECK(std::isfinite(t.dist_m[e - 1]));
  for (std::size_t n = e; n < t.dist_m.size(); ++n) CHECK(std::isnan(t.dist_m[n]));
}

TEST_CASE("noise restricted off the unstable direction keeps y at exactly zero") {
  SGDConfig cfg = saddle_config();
  Matrix basis(2, 1);
  basis << 0.0, 1.0;
  cfg.noise = NoiseModel::subspace_restricted(NoiseModel::sphere_uniform(0.5), basis);
  const Trajectory t = run_sgd(cfg, 8);
  for (std::int64_t n = 0; n <= t.steps(); ++n) CHECK(t.x(0, n) == 0.0);
  const run_summary s = summarize_run(cfg, 0, default_saddle_tolerance(cfg));
  CHECK(s.outcome == run_outcome::at_saddle);
}

TEST_CASE("runs are deterministic functions of the seed") {
  const SGDConfig cfg = saddle_config();
  const Trajectory a = run_sgd(cfg, 99), b = run_sgd(cfg, 99), c = run_sgd(cfg, 100);
  CHECK((a.x.array() == b.x.array()).all());
  CHECK(!(a.x.array() == c.x.array()).all());
}

TEST_CASE("configuration validation") {
  SGDConfig cfg = saddle_config();
  cfg.x0 = vec({0.0, 0.3, 1.0});
  CHECK_THROWS_AS(cfg.validate(), precondition_error);
  CHECK_THROWS_AS(monte_carlo(saddle_config(), 0), precondition_error);
}

TEST_CASE("escape statistics") {
  SGDConfig cfg = saddle_config();
  cfg.horizon = 30000;
  const EscapeStats st = monte_carlo(cfg, 40);
  CHECK(st.n_runs == 40);
  CHECK(st.fraction_escaped + st.fraction_at_saddle + st.fraction_other == doctest::Approx(1.0));
  CHECK(st.fraction_escaped > 0.9);
  REQUIRE(st.runs.size() == 40);
  CHECK(st.runs[3].seed == cfg.master_seed + 3);
}
