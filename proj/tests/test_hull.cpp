#include <limits>

#include "doctest.h"
#include "saddlelab/hull.hpp"
#include "saddlelab/random.hpp"

using namespace saddlelab;

namespace {

// Brute force: affine minimizer on every subset, kept when its weights are
// non-negative and it satisfies <p, g> >= |p|^2 for every generator.
Vector brute_force_min_norm(const Matrix& g) {
  const int n = static_cast<int>(g.cols());
  Vector best;
  double best_norm = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) idx.push_back(i);
    const int k = static_cast<int>(idx.size());
    Matrix s(g.rows(), k);
    for (int i = 0; i < k; ++i) s.col(i) = g.col(idx[static_cast<std::size_t>(i)]);
    // minimize |S w|^2 subject to sum w = 1
    Matrix kkt = Matrix::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = s.transpose() * s;
    kkt.block(0, k, k, 1).setOnes();
    kkt.block(k, 0, 1, k).setOnes();
    Vector rhs = Vector::Zero(k + 1);
    rhs(k) = 1.0;
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Vector sol = lu.solve(rhs);
    if ((sol.head(k).array() < -1e-12).any()) continue;
    const Vector p = s * sol.head(k);
    bool optimal = true;
    for (int i = 0; i < n; ++i)
      if (p.dot(g.col(i)) < p.squaredNorm() - 1e-10) optimal = false;
    if (optimal && p.norm() < best_norm) {
      best_norm = p.norm();
      best = p;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("two generators") {
  Matrix g(2, 2);
  g << 1, 0, 0, 1;
  const hull_point h = min_norm_point(g);
  CHECK((h.point - Vector::Constant(2, 0.5)).norm() < 1e-14);
  CHECK(h.weights.sum() == doctest::Approx(1.0));
}

TEST_CASE("segment whose closest point is interior") {
  Matrix g(2, 2);
  g << -1, -1, 1, -1;
  const hull_point h = min_norm_point(g);
  CHECK((h.point - Vector::Unit(2, 0) * -1.0).norm() < 1e-14);
}

TEST_CASE("four quadrant gradients contain the origin") {
  Matrix g(2, 4);
  g << -1, 1, 1, -1, 1, 1, -1, -1;
  const hull_point h = min_norm_point(g);
  CHECK(h.point.norm() < 1e-12);
  CHECK((h.weights.array() >= -1e-15).all());
}

TEST_CASE("minimum-norm point agrees with brute force on random hulls") {
  rng_t rng = substream(5, 0);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int d = 2 + trial % 3;
    const int n = 4 + trial % 4;
    Matrix g(d, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < d; ++i) g(i, j) = nd(rng) + (i == 0 ? 1.5 : 0.0);
    const hull_point h = min_norm_point(g);
    const Vector oracle = brute_force_min_norm(g);
    CHECK((h.point - oracle).norm() < 1e-9);
    CHECK((g * h.weights - h.point).norm() < 1e-12);
  }
}

TEST_CASE("hull distance") {
  Matrix g(2, 2);
  g << 0, 1, 0, 0;
  Vector u(2);
  u << 0.5, 2.0;
  CHECK(hull_distance(g, u) == doctest::Approx(2.0));
  CHECK_THROWS(min_norm_point(Matrix(2, 0)));
}
