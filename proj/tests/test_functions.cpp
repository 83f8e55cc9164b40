#include <cmath>

#include "doctest.h"
#include "saddlelab/errors.hpp"
#include "saddlelab/functions.hpp"
#include "saddlelab/hull.hpp"
#include "saddlelab/sampling.hpp"

using namespace saddlelab;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

bool has_generator(const SubgradientSet& s, const Vector& g) {
  for (const auto& v : s.generators)
    if ((v - g).norm() < 1e-14) return true;
  return false;
}

}  // namespace

TEST_CASE("saddle_abs values and generators") {
  const Problem p = builtin("saddle_abs");
  CHECK(evaluate(p.f, vec({0.5, 0.2})) == doctest::Approx(-0.25 + 0.2));
  CHECK(evaluate(p.f, vec({0.5, -0.2})) == doctest::Approx(-0.25 + 0.2));

  const SubgradientSet s = clarke_generators(p.f, vec({0.5, 0.0}));
  CHECK(s.generators.size() == 2);
  CHECK(has_generator(s, vec({-1.0, 1.0})));
  CHECK(has_generator(s, vec({-1.0, -1.0})));
  CHECK((min_norm_subgradient(p.f, vec({0.5, 0.0})) - vec({-1.0, 0.0})).norm() == 0.0);
  CHECK(min_norm_subgradient(p.f, Vector::Zero(2)).norm() == 0.0);

  const SubgradientSet off = clarke_generators(p.f, vec({0.5, 0.3}));
  CHECK(off.generators.size() == 1);
  CHECK((off.generators[0] - vec({-1.0, 1.0})).norm() == 0.0);
}

TEST_CASE("double_abs has four generators at the origin") {
  const Problem p = builtin("double_abs");
  CHECK(p.manifold.dim() == 0);
  const SubgradientSet s = clarke_generators(p.f, Vector::Zero(2));
  CHECK(s.generators.size() == 4);
  for (double a : {-1.0, 1.0})
    for (double b : {-1.0, 1.0}) CHECK(has_generator(s, vec({a, b})));
  CHECK(min_norm_subgradient(p.f, Vector::Zero(2)).norm() < 1e-12);
  CHECK(evaluate(p.f, vec({0.3, -0.4})) == doctest::Approx(-0.3 + 0.4));
}

TEST_CASE("catalog closed forms") {
  rng_t rng = substream(3, 0);
  const auto check = [&](const std::string& name, auto formula) {
    const Problem p = builtin(name);
    for (int i = 0; i < 100; ++i) {
      const Vector x = sample_ball(Vector::Zero(2), 2.0, rng);
      CHECK(evaluate(p.f, x) == doctest::Approx(formula(x(0), x(1))).epsilon(1e-13));
    }
  };
  check("neg_abs", [](double y, double z) { return -y * y - std::abs(z); });
  check("abs_z", [](double, double z) { return std::abs(z); });
  check("quad_z", [](double, double z) { return z * z; });
  check("min_abs", [](double y, double z) { return y * y + std::abs(z); });
  check("verdier_cone", [](double y, double z) { return std::abs(z) + std::min(std::abs(y), std::abs(z)); });
  CHECK_THROWS_AS(builtin("nope"), unknown_function);
}

TEST_CASE("separable family") {
  const Problem p = separable(vec({-1.0, 0.5}), vec({2.0}));
  CHECK(p.f.dim() == 3);
  CHECK(p.manifold.dim() == 2);
  const Vector x = vec({0.3, -0.2, -0.7});
  CHECK(evaluate(p.f, x) == doctest::Approx(-0.09 + 0.5 * 0.04 + 2.0 * 0.7));
  const SubgradientSet s = clarke_generators(p.f, vec({0.3, -0.2, 0.0}));
  CHECK(s.generators.size() == 2);
  CHECK_THROWS_AS(separable(vec({1.0}), vec({-1.0})), unknown_function);
}

TEST_CASE("minimum-norm subgradient lies in the hull and is minimal") {
  rng_t rng = substream(9, 0);
  for (const std::string name : {"saddle_abs", "double_abs", "verdier_cone", "min_abs"}) {
    const Problem p = builtin(name);
    for (int i = 0; i < 200; ++i) {
      Vector x = sample_ball(Vector::Zero(2), 1.0, rng);
      if (i % 3 == 0) x(1) = 0.0;          // on the z = 0 kink
      if (i % 3 == 1) x(1) = std::abs(x(0));  // on |y| = |z|
      const Matrix g = clarke_generators(p.f, x).as_columns();
      const Vector m = min_norm_subgradient(p.f, x);
      CHECK(hull_distance(g, m) < 1e-12);
      for (Eigen::Index j = 0; j < g.cols(); ++j) CHECK(m.dot(g.col(j)) >= m.squaredNorm() - 1e-12);
    }
  }
}

TEST_CASE("selection rules") {
  const Problem p = builtin("saddle_abs");
  const Vector x = vec({0.5, 0.0});
  CHECK((select_subgradient(p.f, x, selection_rule::active_piece) - vec({-1.0, 1.0})).norm() == 0.0);
  CHECK((select_subgradient(p.f, x, selection_rule::min_norm) - vec({-1.0, 0.0})).norm() == 0.0);
  CHECK_THROWS_AS(select_subgradient(p.f, x, selection_rule::random_vertex), precondition_error);
  rng_t rng = substream(1, 0);
  int up = 0;
  for (int i = 0; i < 400; ++i) {
    const Vector v = select_subgradient(p.f, x, selection_rule::random_vertex, &rng);
    CHECK(std::abs(v(1)) == 1.0);
    up += v(1) > 0 ? 1 : 0;
  }
  CHECK(up > 150);
  CHECK(up < 250);
}

TEST_CASE("tilt subtracts a linear term") {
  const Problem p = builtin("min_abs");
  const Vector u = vec({0.3, -0.1});
  const PiecewiseSmoothFunction t = tilt(p.f, u);
  const Vector x = vec({0.4, 0.25});
  CHECK(evaluate(t, x) == doctest::Approx(evaluate(p.f, x) - u.dot(x)));
  CHECK((min_norm_subgradient(t, x) - (min_norm_subgradient(p.f, x) - u)).norm() < 1e-14);
}

TEST_CASE("custom pieces and dimension checks") {
  const auto value = [](const Vector& x) { return std::sin(x(0)) + x(1) * x(1); };
  const vector_field grad = [](const Vector& x) { return vec({std::cos(x(0)), 2.0 * x(1)}); };
  const matrix_field hess = [](const Vector& x) {
    Matrix h = Matrix::Zero(2, 2);
    h(0, 0) = -std::sin(x(0));
    h(1, 1) = 2.0;
    return h;
  };
  const PiecewiseSmoothFunction f(2, {{Region{}, SmoothPiece::custom(2, value, grad, hess)}}, "smooth");
  const Vector x = vec({0.2, -0.3});
  CHECK(evaluate(f, x) == doctest::Approx(value(x)));
  CHECK((min_norm_subgradient(f, x) - grad(x)).norm() < 1e-15);
  CHECK_THROWS_AS(PiecewiseSmoothFunction(3, {{Region{}, SmoothPiece::custom(2, value, grad, hess)}}),
                  malformed_function);
}

TEST_CASE("Lipschitz bound dominates sampled slopes") {
  const Problem p = builtin("saddle_abs");
  const double bound = p.f.lipschitz_bound_on(Vector::Zero(2), 1.0);
  CHECK(bound == doctest::Approx(3.0));
  rng_t rng = substream(2, 0);
  for (int i = 0; i < 500; ++i) {
    const Vector a = sample_ball(Vector::Zero(2), 1.0, rng);
    const Vector b = sample_ball(Vector::Zero(2), 1.0, rng);
    CHECK(std::abs(evaluate(p.f, a) - evaluate(p.f, b)) <= bound * (a - b).norm() + 1e-12);
  }
}

TEST_CASE("uncovered points are reported") {
  Region half;
  half.constraints.push_back({vec({1.0, 0.0}), 0.0, sign_requirement::positive});
  const PiecewiseSmoothFunction f(2, {{half, SmoothPiece::quadratic(0.0, vec({1.0, 0.0}), Matrix::Zero(2, 2))}});
  CHECK_THROWS_AS(evaluate(f, vec({-1.0, 0.0})), malformed_function);
}
