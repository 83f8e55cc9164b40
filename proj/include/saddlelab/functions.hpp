#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "saddlelab/geometry.hpp"
#include "saddlelab/linalg.hpp"
#include "saddlelab/random.hpp"

namespace saddlelab {

enum class sign_requirement { positive, negative, zero };

/// One sign condition on the affine functional <normal, x> + offset.
struct sign_constraint {
  Vector normal;
  double offset = 0.0;
  sign_requirement sign = sign_requirement::positive;
};

/// Polyhedral cell given by a list of sign conditions. Closed membership
/// admits points within `boundary_tolerance` of a face.
struct Region {
  std::vector<sign_constraint> constraints;
  double boundary_tolerance = 1e-12;

  bool contains(const Vector& x) const;
  /// Strict interior: every sign condition holds with margin.
  bool contains_interior(const Vector& x) const;
};

/// Smooth function with exact value, gradient and Hessian. Quadratic pieces
/// c + <g,x> + x'Hx/2 are stored explicitly; anything else goes through
/// user-supplied closures.
class SmoothPiece {
 public:
  using value_fn = std::function<double(const Vector&)>;

  static SmoothPiece quadratic(double constant, Vector linear, Matrix hessian);
  static SmoothPiece custom(int dim, value_fn value, vector_field gradient,
                            matrix_field hessian);

  int dim() const { return static_cast<int>(linear_.size()); }
  bool is_quadratic() const { return !value_; }
  double constant() const { return constant_; }
  const Vector& linear() const { return linear_; }
  const Matrix& quadratic_term() const { return hessian_; }

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  void gradient(const Vector& x, Eigen::Ref<Vector> out) const;
  Matrix hessian(const Vector& x) const;

  /// Copy with <u, x> subtracted.
  SmoothPiece tilted(const Vector& u) const;

 private:
  double constant_ = 0.0;
  Vector linear_;  // also carries the tilt for custom pieces
  Matrix hessian_;
  value_fn value_;
  vector_field gradient_;
  matrix_field hessian_fn_;
};

/// Generators of the Clarke subdifferential at `point`: one gradient per
/// covering piece, ordered by piece id.
struct SubgradientSet {
  Vector point;
  std::vector<Vector> generators;
  std::vector<int> piece_ids;

  Matrix as_columns() const;
};

class PiecewiseSmoothFunction {
 public:
  struct entry {
    Region region;
    SmoothPiece piece;
  };

  PiecewiseSmoothFunction() = default;
  PiecewiseSmoothFunction(int dim, std::vector<entry> pieces, std::string name = {});

  int dim() const { return dim_; }
  const std::string& name() const { return name_; }
  const std::vector<entry>& pieces() const { return pieces_; }

  /// Id of the lowest-id piece whose closed region contains x, or -1.
  int first_active_piece(const Vector& x) const;

  /// Upper bound on generator norms over the ball B(center, radius). Exact
  /// for quadratic pieces; custom pieces are sampled.
  double lipschitz_bound_on(const Vector& center, double radius) const;

 private:
  int dim_ = 0;
  std::vector<entry> pieces_;
  std::string name_;
};

double evaluate(const PiecewiseSmoothFunction& f, const Vector& x);
SubgradientSet clarke_generators(const PiecewiseSmoothFunction& f, const Vector& x);
Vector min_norm_subgradient(const PiecewiseSmoothFunction& f, const Vector& x);

enum class selection_rule { min_norm, active_piece, random_vertex };

/// Element of the Clarke subdifferential chosen by `rule`. random_vertex
/// draws from `rng`, which must then be non-null.
Vector select_subgradient(const PiecewiseSmoothFunction& f, const Vector& x,
                          selection_rule rule, rng_t* rng = nullptr);

/// f(x) - <u, x>.
PiecewiseSmoothFunction tilt(const PiecewiseSmoothFunction& f, const Vector& u);

/// A function together with its active manifold and critical point.
struct Problem {
  std::string name;
  PiecewiseSmoothFunction f;
  Manifold manifold;
  Vector critical_point;
};

struct builtin_params {
  Vector a;  // separable: quadratic coefficients
  Vector b;  // separable: absolute-value weights, all > 0
};

/// Catalog entries:
///   saddle_abs    -y^2 + |z|              M = R x {0}
///   double_abs    -|y| + |z|              M = {0}
///   neg_abs       -y^2 - |z|              M = R x {0}
///   abs_z         |z|                     M = R x {0}
///   quad_z        z^2                     M = R x {0}
///   min_abs       y^2 + |z|               M = R x {0}
///   verdier_cone  |z| + min(|y|, |z|)     M = R x {0}
///   separable     sum a_i x_i^2 + sum b_j |x_{k+j}|   M = R^k x {0}^m
Problem builtin(const std::string& name, const builtin_params& params = {});
Problem separable(const Vector& a, const Vector& b);
std::vector<std::string> catalog_names();

/// Smooth representative of f near M: the gradient of the lowest-id piece
/// covering each point (evaluated on M these all agree tangentially).
vector_field smooth_representative_gradient(const PiecewiseSmoothFunction& f);

}  // namespace saddlelab
