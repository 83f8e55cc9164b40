#pragma once

#include "saddlelab/linalg.hpp"

namespace saddlelab {

struct hull_point {
  Vector point;
  Vector weights;  // convex weights over the input columns
  int iterations = 0;
};

/// Euclidean projection of 0 onto the convex hull of the columns of
/// `generators`. Up to three columns are handled by an exact active-set
/// enumeration; larger sets use Wolfe's minimum-norm-point iteration, stopped
/// once the conditional-gradient duality gap drops below `gap_tol`.
hull_point min_norm_point(const Matrix& generators, double gap_tol = 1e-12);

/// Distance from `u` to the convex hull of the columns of `generators`.
double hull_distance(const Matrix& generators, const Vector& u);

}  // namespace saddlelab
