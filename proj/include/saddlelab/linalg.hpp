#pragma once

#include <Eigen/Dense>

namespace saddlelab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Orthonormal basis for the column span of `m`. Columns whose residual falls
/// below `tol` relative to the largest column are dropped.
Matrix orthonormal_span(const Matrix& m, double tol = 1e-12);

/// Orthogonal projector onto the column span of an orthonormal basis.
inline Matrix span_projector(const Matrix& basis) {
  return basis * basis.transpose();
}

}  // namespace saddlelab
