#include "saddlelab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "saddlelab/errors.hpp"

namespace saddlelab {

Matrix orthonormal_span(const Matrix& m, double tol) {
  if (m.cols() == 0 || m.rows() == 0) return Matrix(m.rows(), 0);
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(tol);
  const Eigen::Index rank = qr.rank();
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), rank);
  return q;
}

constraint_map sphere_constraint(const Vector& center, double radius) {
  if (!(radius > 0)) throw precondition_error("sphere radius must be positive");
  constraint_map c;
  c.codim = 1;
  c.name = "sphere";
  c.value = [center, radius](const Vector& x) {
    Vector g(1);
    g(0) = (x - center).squaredNorm() - radius * radius;
    return g;
  };
  c.jacobian = [center](const Vector& x) {
    Matrix j(1, x.size());
    j.row(0) = 2.0 * (x - center).transpose();
    return j;
  };
  return c;
}

Manifold Manifold::affine(Vector base, Matrix basis) {
  if (basis.rows() != base.size())
    throw precondition_error("affine manifold: basis rows must match base point dimension");
  const Matrix gram = basis.transpose() * basis;
  if (basis.cols() > 0 &&
      (gram - Matrix::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff() > 1e-12)
    throw precondition_error("affine manifold: tangent basis is not orthonormal");
  Manifold m;
  m.kind_ = kind::affine;
  m.d_ = static_cast<int>(base.size());
  m.k_ = static_cast<int>(basis.cols());
  m.base_ = std::move(base);
  m.basis_ = std::move(basis);
  return m;
}

Manifold Manifold::affine_span(Vector base, const Matrix& spanning) {
  return affine(std::move(base), orthonormal_span(spanning));
}

Manifold Manifold::coordinate(int d, int k) {
  if (k < 0 || k > d) throw precondition_error("coordinate manifold: need 0 <= k <= d");
  return affine(Vector::Zero(d), Matrix::Identity(d, k));
}

Manifold Manifold::point(Vector p) {
  const auto d = p.size();
  return affine(std::move(p), Matrix(d, 0));
}

Manifold Manifold::whole_space(int d) {
  return affine(Vector::Zero(d), Matrix::Identity(d, d));
}

Manifold Manifold::implicit(constraint_map constraint, Vector reference,
                            double validity_radius, projection_options options) {
  const int d = static_cast<int>(reference.size());
  if (constraint.codim < 0 || constraint.codim > d)
    throw precondition_error("implicit manifold: codimension out of range");
  if (!(validity_radius > 0))
    throw precondition_error("implicit manifold: validity radius must be positive");
  Manifold m;
  m.kind_ = kind::implicit;
  m.d_ = d;
  m.k_ = d - constraint.codim;
  m.base_ = std::move(reference);
  m.validity_radius_ = validity_radius;
  m.options_ = options;
  m.constraint_ = std::make_shared<const constraint_map>(std::move(constraint));

  Eigen::JacobiSVD<Matrix> svd(m.constraint_->jacobian(m.base_));
  const auto& s = svd.singularValues();
  if (s.size() < m.constraint_->codim || s(s.size() - 1) <= 1e-12 * std::max(1.0, s(0)))
    throw singular_constraint("implicit manifold: constraint Jacobian is rank deficient at the reference point");
  return m;
}

Manifold Manifold::unit_circle(Vector reference, double validity_radius) {
  return implicit(sphere_constraint(Vector::Zero(2), 1.0), std::move(reference),
                  validity_radius);
}

double Manifold::residual(const Vector& y) const {
  if (kind_ == kind::affine) {
    const Vector r = y - base_;
    return (r - basis_ * (basis_.transpose() * r)).norm();
  }
  return constraint_->value(y).norm();
}

namespace {

Matrix normal_projector(const Matrix& j) {
  const Matrix jjt = j * j.transpose();
  Eigen::LDLT<Matrix> ldlt(jjt);
  return j.transpose() * ldlt.solve(j);
}

}  // namespace

Vector Manifold::project(const Vector& x) const {
  if (x.size() != d_) throw precondition_error("project: dimension mismatch");
  if (kind_ == kind::affine) return base_ + basis_ * (basis_.transpose() * (x - base_));

  if ((x - base_).norm() > validity_radius_) {
    std::ostringstream os;
    os << "project: point lies outside the validity radius " << validity_radius_
       << " of the reference point";
    throw precondition_error(os.str());
  }
  const auto& c = *constraint_;
  // Gauss-Newton on the closest-point stationarity system, with backtracking
  // on the combined feasibility / stationarity residual.
  auto merit = [&](const Vector& y) {
    const Vector g = c.value(y);
    const Matrix j = c.jacobian(y);
    const Vector t = (x - y) - normal_projector(j) * (x - y);
    return g.squaredNorm() + t.squaredNorm();
  };
  Vector y = x;
  double phi = merit(y);
  for (int it = 0; it < options_.max_iterations; ++it) {
    const Vector g = c.value(y);
    const Matrix j = c.jacobian(y);
    const Matrix jjt = j * j.transpose();
    Eigen::LDLT<Matrix> ldlt(jjt);
    const Vector to_x = x - y;
    const Vector step = to_x - j.transpose() * ldlt.solve(g + j * to_x);
    if (!step.allFinite()) break;
    if (step.norm() <= options_.tolerance * (1.0 + y.norm()) &&
        g.norm() <= 1e-12)
      return y;
    double t = 1.0;
    Vector trial = y + step;
    double phi_trial = merit(trial);
    while (!(phi_trial < phi) && t > 1e-6) {
      t *= 0.5;
      trial = y + t * step;
      phi_trial = merit(trial);
    }
    if (!(phi_trial < phi)) {
      // No decrease left: accept if already feasible to working precision.
      if (g.norm() <= 1e-12) return y;
      break;
    }
    y = trial;
    phi = phi_trial;
  }
  const double res = c.value(y).norm();
  if (res <= 1e-12 && std::sqrt(phi) <= 1e-10) return y;
  throw no_convergence("project: Gauss-Newton did not converge", y, res);
}

Matrix Manifold::tangent_basis_at(const Vector& y) const {
  if (kind_ == kind::affine) return basis_;
  const Matrix j = constraint_->jacobian(y);
  Eigen::JacobiSVD<Matrix> svd(j, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s.size() < constraint_->codim || s(s.size() - 1) <= 1e-12 * std::max(1.0, s(0)))
    throw singular_constraint("tangent basis: constraint Jacobian is rank deficient");
  return svd.matrixV().rightCols(k_);
}

Vector project(const Manifold& m, const Vector& x) { return m.project(x); }

TangentProjector tangent_projector(const Manifold& m, const Vector& y) {
  if (m.residual(y) > 1e-8) throw precondition_error("tangent_projector: point is not on the manifold");
  const int d = m.ambient_dim();
  if (m.type() == Manifold::kind::affine)
    return {span_projector(m.tangent_basis()), y};
  const Matrix j = m.constraint().jacobian(y);
  Eigen::JacobiSVD<Matrix> svd(j);
  const auto& s = svd.singularValues();
  if (s.size() < m.constraint().codim || s(s.size() - 1) <= 1e-12 * std::max(1.0, s(0)))
    throw singular_constraint("tangent_projector: constraint Jacobian is rank deficient");
  return {Matrix::Identity(d, d) - normal_projector(j), y};
}

double manifold_distance(const Manifold& m, const Vector& x) {
  return (x - m.project(x)).norm();
}

Vector riem_gradient(const vector_field& gradient, const Manifold& m, const Vector& y) {
  return tangent_projector(m, y).matrix * gradient(y);
}

Matrix riem_hessian(const vector_field& gradient, const Manifold& m, const Vector& y) {
  const Matrix basis = m.tangent_basis_at(y);
  const Matrix p = tangent_projector(m, y).matrix;
  const int k = static_cast<int>(basis.cols());
  const double h = std::max(1e-5, 1e-5 * y.norm());

  auto field = [&](const Vector& x) {
    const Vector px = m.project(x);
    return Vector(tangent_projector(m, px).matrix * gradient(px));
  };

  Matrix jb(y.size(), k);
  for (int j = 0; j < k; ++j) {
    const Vector plus = y + h * basis.col(j);
    const Vector minus = y - h * basis.col(j);
    const double spread = (plus - minus).norm();
    if (!std::isfinite(spread) || spread < h)
      throw degenerate_step("riem_hessian: finite-difference step vanished in floating point");
    jb.col(j) = (field(plus) - field(minus)) / spread;
  }
  const Matrix hess = basis.transpose() * p * jb;
  return 0.5 * (hess + hess.transpose());
}

double subspace_aperture(const Matrix& e1, const Matrix& e2) {
  const Matrix q1 = orthonormal_span(e1);
  if (q1.cols() == 0) return 0.0;
  const Matrix q2 = orthonormal_span(e2);
  const Matrix r = q1 - q2 * (q2.transpose() * q1);
  Eigen::JacobiSVD<Matrix> svd(r);
  return svd.singularValues()(0);
}

}  // namespace saddlelab
