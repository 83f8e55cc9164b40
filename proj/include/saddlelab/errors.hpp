#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace saddlelab {

/// Base class for every error raised by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (bad dimensions, point off the
/// manifold, empty grids, ...).
class precondition_error : public error {
 public:
  using error::error;
};

class no_convergence : public error {
 public:
  no_convergence(const std::string& what, Eigen::VectorXd last_iterate,
                 double residual)
      : error(what), last_iterate_(std::move(last_iterate)),
        residual_(residual) {}
  const Eigen::VectorXd& last_iterate() const { return last_iterate_; }
  double residual() const { return residual_; }

 private:
  Eigen::VectorXd last_iterate_;
  double residual_;
};

class singular_constraint : public error {
 public:
  using error::error;
};
class degenerate_step : public error {
 public:
  using error::error;
};
class malformed_function : public error {
 public:
  using error::error;
};
class unknown_function : public error {
 public:
  using error::error;
};
class not_critical : public error {
 public:
  using error::error;
};
class divergent_chi : public error {
 public:
  using error::error;
};
class invalid_exponent : public error {
 public:
  using error::error;
};
class angle_condition_fails : public error {
 public:
  using error::error;
};
class no_negative_eigenvalue : public error {
 public:
  using error::error;
};
class near_defective : public error {
 public:
  using error::error;
};
class spectral_gap_violation : public error {
 public:
  using error::error;
};
class singular_system : public error {
 public:
  using error::error;
};
class invalid_manifold_spec : public error {
 public:
  using error::error;
};

}  // namespace saddlelab
