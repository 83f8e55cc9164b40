#include "saddlelab/hull.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "saddlelab/errors.hpp"

namespace saddlelab {

namespace {

// Minimizer of |V a| over the affine hull of the columns of V (sum a = 1).
// Returns false when the columns are affinely dependent.
bool affine_minimizer(const Matrix& v, Vector& alpha) {
  const Eigen::Index m = v.cols();
  Matrix kkt = Matrix::Zero(m + 1, m + 1);
  kkt.topLeftCorner(m, m) = v.transpose() * v;
  kkt.block(0, m, m, 1).setOnes();
  kkt.block(m, 0, 1, m).setOnes();
  Vector rhs = Vector::Zero(m + 1);
  rhs(m) = 1.0;
  Eigen::FullPivLU<Matrix> lu(kkt);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) return false;
  alpha = lu.solve(rhs).head(m);
  return alpha.allFinite();
}

hull_point enumerate_small(const Matrix& g) {
  const int m = static_cast<int>(g.cols());
  hull_point best;
  double best_norm = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << m); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < m; ++i)
      if (mask & (1 << i)) idx.push_back(i);
    Matrix sub(g.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(c) = g.col(idx[c]);
    Vector alpha;
    if (idx.size() == 1) {
      alpha = Vector::Ones(1);
    } else if (!affine_minimizer(sub, alpha) || alpha.minCoeff() < 0.0) {
      continue;
    }
    const Vector p = sub * alpha;
    const double n = p.norm();
    if (n < best_norm) {
      best_norm = n;
      best.point = p;
      best.weights = Vector::Zero(m);
      for (std::size_t c = 0; c < idx.size(); ++c) best.weights(idx[c]) = alpha(c);
    }
  }
  return best;
}

hull_point wolfe(const Matrix& g, double gap_tol) {
  const Eigen::Index m = g.cols();
  std::vector<Eigen::Index> active;
  std::vector<double> lambda;
  Eigen::Index start = 0;
  g.colwise().squaredNorm().minCoeff(&start);
  active.push_back(start);
  lambda.push_back(1.0);
  Vector x = g.col(start);
  const double scale = std::max(1.0, g.colwise().squaredNorm().maxCoeff());

  int it = 0;
  for (; it < 1000; ++it) {
    Eigen::Index s = 0;
    (g.transpose() * x).minCoeff(&s);
    const double gap = x.squaredNorm() - x.dot(g.col(s));
    if (gap <= gap_tol * scale) break;
    if (std::find(active.begin(), active.end(), s) != active.end()) break;
    active.push_back(s);
    lambda.push_back(0.0);

    for (;;) {
      Matrix v(g.rows(), static_cast<Eigen::Index>(active.size()));
      for (std::size_t c = 0; c < active.size(); ++c) v.col(c) = g.col(active[c]);
      Vector alpha;
      if (!affine_minimizer(v, alpha)) {
        // Affinely dependent support: drop the newest point and stop.
        active.pop_back();
        lambda.pop_back();
        it = 1000;
        break;
      }
      if (alpha.minCoeff() > 1e-15) {
        lambda.assign(alpha.data(), alpha.data() + alpha.size());
        x = v * alpha;
        break;
      }
      double theta = 1.0;
      for (std::size_t c = 0; c < active.size(); ++c)
        if (alpha(c) <= 1e-15)
          theta = std::min(theta, lambda[c] / (lambda[c] - alpha(c)));
      std::vector<Eigen::Index> kept;
      std::vector<double> kept_lambda;
      for (std::size_t c = 0; c < active.size(); ++c) {
        const double l = theta * alpha(c) + (1.0 - theta) * lambda[c];
        if (l > 1e-15) {
          kept.push_back(active[c]);
          kept_lambda.push_back(l);
        }
      }
      active.swap(kept);
      lambda.swap(kept_lambda);
      double total = 0.0;
      for (double l : lambda) total += l;
      x.setZero();
      for (std::size_t c = 0; c < active.size(); ++c) {
        lambda[c] /= total;
        x += lambda[c] * g.col(active[c]);
      }
    }
  }
  hull_point out;
  out.weights = Vector::Zero(m);
  out.point = Vector::Zero(g.rows());
  for (std::size_t c = 0; c < active.size(); ++c) {
    out.weights(active[c]) = lambda[c];
    out.point += lambda[c] * g.col(active[c]);
  }
  out.iterations = it;
  return out;
}

}  // namespace

hull_point min_norm_point(const Matrix& generators, double gap_tol) {
  if (generators.cols() == 0) throw precondition_error("min_norm_point: empty generator set");
  if (generators.cols() == 1) return {generators.col(0), Vector::Ones(1), 0};
  if (generators.cols() <= 3) return enumerate_small(generators);
  return wolfe(generators, gap_tol);
}

double hull_distance(const Matrix& generators, const Vector& u) {
  return min_norm_point(generators.colwise() - u).point.norm();
}

}  // namespace saddlelab
