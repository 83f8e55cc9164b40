#pragma once

#include <functional>
#include <memory>
#include <string>

#include "saddlelab/linalg.hpp"

namespace saddlelab {

using vector_field = std::function<Vector(const Vector&)>;
using matrix_field = std::function<Matrix(const Vector&)>;

/// Zero set of a smooth map g: R^d -> R^(d-k), with its Jacobian.
struct constraint_map {
  vector_field value;
  matrix_field jacobian;
  int codim = 0;
  std::string name;
};

/// Sphere {x : |x - center| = radius} as a constraint map.
constraint_map sphere_constraint(const Vector& center, double radius);

struct projection_options {
  int max_iterations = 100;
  double tolerance = 1e-13;
};

class Manifold {
 public:
  enum class kind { affine, implicit };

  /// Affine subspace base + span(basis). Columns of `basis` must be
  /// orthonormal to 1e-12.
  static Manifold affine(Vector base, Matrix basis);
  /// Same as affine() but orthonormalizes an arbitrary spanning set first.
  static Manifold affine_span(Vector base, const Matrix& spanning);
  /// R^k x {0}^(d-k): the first k coordinates are free.
  static Manifold coordinate(int d, int k);
  static Manifold point(Vector p);
  static Manifold whole_space(int d);

  /// Zero set of `constraint`, projected onto near `reference`.
  static Manifold implicit(constraint_map constraint, Vector reference,
                           double validity_radius,
                           projection_options options = {});
  /// Unit circle in R^2; the validity radius defaults to half its reach.
  static Manifold unit_circle(Vector reference, double validity_radius = 0.5);

  kind type() const { return kind_; }
  int ambient_dim() const { return d_; }
  int dim() const { return k_; }

  const Vector& base_point() const { return base_; }
  const Matrix& tangent_basis() const { return basis_; }
  const Vector& reference_point() const { return base_; }
  double validity_radius() const { return validity_radius_; }
  const constraint_map& constraint() const { return *constraint_; }

  /// Constraint residual at y; orthogonal residual for affine manifolds.
  double residual(const Vector& y) const;

  Vector project(const Vector& x) const;
  /// Orthonormal d x k basis of the tangent space at y (y on M).
  Matrix tangent_basis_at(const Vector& y) const;

 private:
  Manifold() = default;

  kind kind_ = kind::affine;
  int d_ = 0;
  int k_ = 0;
  Vector base_;  // base point (affine) or reference point (implicit)
  Matrix basis_;
  std::shared_ptr<const constraint_map> constraint_;
  double validity_radius_ = 0.0;
  projection_options options_;
};

struct TangentProjector {
  Matrix matrix;
  Vector manifold_point;
};

Vector project(const Manifold& m, const Vector& x);
TangentProjector tangent_projector(const Manifold& m, const Vector& y);
double manifold_distance(const Manifold& m, const Vector& x);

/// Projected gradient P_T grad F(y).
Vector riem_gradient(const vector_field& gradient, const Manifold& m,
                     const Vector& y);

/// k x k Hessian of F restricted to M, in the coordinates of
/// tangent_basis_at(y). Central differences of the projected gradient field.
Matrix riem_hessian(const vector_field& gradient, const Manifold& m,
                    const Vector& y);

/// Largest distance from a unit vector of span(e1) to span(e2).
double subspace_aperture(const Matrix& e1, const Matrix& e2);

}  // namespace saddlelab
