#include "saddlelab/functions.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "saddlelab/errors.hpp"
#include "saddlelab/hull.hpp"
#include "saddlelab/sampling.hpp"

namespace saddlelab {

namespace {

double signed_value(const sign_constraint& c, const Vector& x) {
  return c.normal.dot(x) + c.offset;
}

}  // namespace

bool Region::contains(const Vector& x) const {
  for (const auto& c : constraints) {
    const double s = signed_value(c, x);
    switch (c.sign) {
      case sign_requirement::positive:
        if (s < -boundary_tolerance) return false;
        break;
      case sign_requirement::negative:
        if (s > boundary_tolerance) return false;
        break;
      case sign_requirement::zero:
        if (std::abs(s) > boundary_tolerance) return false;
        break;
    }
  }
  return true;
}

bool Region::contains_interior(const Vector& x) const {
  for (const auto& c : constraints) {
    const double s = signed_value(c, x);
    switch (c.sign) {
      case sign_requirement::positive:
        if (!(s > boundary_tolerance)) return false;
        break;
      case sign_requirement::negative:
        if (!(s < -boundary_tolerance)) return false;
        break;
      case sign_requirement::zero:
        return false;
    }
  }
  return true;
}

SmoothPiece SmoothPiece::quadratic(double constant, Vector linear, Matrix hessian) {
  if (hessian.rows() != linear.size() || hessian.cols() != linear.size())
    throw malformed_function("quadratic piece: Hessian shape does not match the linear term");
  SmoothPiece p;
  p.constant_ = constant;
  p.linear_ = std::move(linear);
  p.hessian_ = std::move(hessian);
  return p;
}

SmoothPiece SmoothPiece::custom(int dim, value_fn value, vector_field gradient,
                                matrix_field hessian) {
  if (!value || !gradient || !hessian)
    throw malformed_function("custom piece: value, gradient and Hessian oracles are all required");
  SmoothPiece p;
  p.linear_ = Vector::Zero(dim);
  p.hessian_ = Matrix::Zero(dim, dim);
  p.value_ = std::move(value);
  p.gradient_ = std::move(gradient);
  p.hessian_fn_ = std::move(hessian);
  return p;
}

double SmoothPiece::value(const Vector& x) const {
  if (value_) return value_(x) + linear_.dot(x);
  return constant_ + linear_.dot(x) + 0.5 * x.dot(hessian_ * x);
}

void SmoothPiece::gradient(const Vector& x, Eigen::Ref<Vector> out) const {
  if (gradient_) {
    out = gradient_(x) + linear_;
    return;
  }
  out.noalias() = hessian_ * x;
  out += linear_;
}

Vector SmoothPiece::gradient(const Vector& x) const {
  Vector out(linear_.size());
  gradient(x, out);
  return out;
}

Matrix SmoothPiece::hessian(const Vector& x) const {
  if (hessian_fn_) return hessian_fn_(x);
  return hessian_;
}

SmoothPiece SmoothPiece::tilted(const Vector& u) const {
  SmoothPiece p = *this;
  p.linear_ -= u;
  return p;
}

Matrix SubgradientSet::as_columns() const {
  Matrix m(point.size(), static_cast<Eigen::Index>(generators.size()));
  for (std::size_t i = 0; i < generators.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = generators[i];
  return m;
}

PiecewiseSmoothFunction::PiecewiseSmoothFunction(int dim, std::vector<entry> pieces,
                                                 std::string name)
    : dim_(dim), pieces_(std::move(pieces)), name_(std::move(name)) {
  if (dim <= 0) throw malformed_function("piecewise function: dimension must be positive");
  if (pieces_.empty()) throw malformed_function("piecewise function: no pieces");
  for (const auto& e : pieces_) {
    if (e.piece.dim() != dim) throw malformed_function("piecewise function: piece dimension mismatch");
    for (const auto& c : e.region.constraints)
      if (c.normal.size() != dim)
        throw malformed_function("piecewise function: region functional dimension mismatch");
  }
}

int PiecewiseSmoothFunction::first_active_piece(const Vector& x) const {
  for (std::size_t i = 0; i < pieces_.size(); ++i)
    if (pieces_[i].region.contains(x)) return static_cast<int>(i);
  return -1;
}

double PiecewiseSmoothFunction::lipschitz_bound_on(const Vector& center, double radius) const {
  double bound = 0.0;
  bool sampled = false;
  for (const auto& e : pieces_) {
    if (!e.piece.is_quadratic()) {
      sampled = true;
      continue;
    }
    const Matrix& h = e.piece.quadratic_term();
    const double op = h.size() == 0 ? 0.0 : Eigen::JacobiSVD<Matrix>(h).singularValues()(0);
    bound = std::max(bound, e.piece.gradient(center).norm() + op * radius);
  }
  if (sampled) {
    rng_t rng = substream(0x11b5, 0);
    for (int i = 0; i < 4096; ++i) {
      const Vector x = i == 0 ? center : sample_ball(center, radius, rng);
      for (const auto& e : pieces_)
        if (!e.piece.is_quadratic() && e.region.contains(x))
          bound = std::max(bound, e.piece.gradient(x).norm());
    }
  }
  return bound;
}

double evaluate(const PiecewiseSmoothFunction& f, const Vector& x) {
  const int id = f.first_active_piece(x);
  if (id < 0) throw malformed_function("evaluate: no region covers the point");
  return f.pieces()[static_cast<std::size_t>(id)].piece.value(x);
}

SubgradientSet clarke_generators(const PiecewiseSmoothFunction& f, const Vector& x) {
  SubgradientSet s;
  s.point = x;
  const auto& pieces = f.pieces();
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (!pieces[i].region.contains(x)) continue;
    s.generators.push_back(pieces[i].piece.gradient(x));
    s.piece_ids.push_back(static_cast<int>(i));
  }
  if (s.generators.empty()) throw malformed_function("clarke_generators: no region covers the point");
  return s;
}

Vector min_norm_subgradient(const PiecewiseSmoothFunction& f, const Vector& x) {
  const SubgradientSet s = clarke_generators(f, x);
  if (s.generators.size() == 1) return s.generators.front();
  return min_norm_point(s.as_columns()).point;
}

Vector select_subgradient(const PiecewiseSmoothFunction& f, const Vector& x,
                          selection_rule rule, rng_t* rng) {
  switch (rule) {
    case selection_rule::min_norm:
      return min_norm_subgradient(f, x);
    case selection_rule::active_piece: {
      const int id = f.first_active_piece(x);
      if (id < 0) throw malformed_function("select_subgradient: no region covers the point");
      return f.pieces()[static_cast<std::size_t>(id)].piece.gradient(x);
    }
    case selection_rule::random_vertex: {
      if (rng == nullptr) throw precondition_error("select_subgradient: random_vertex needs a random stream");
      const SubgradientSet s = clarke_generators(f, x);
      std::uniform_int_distribution<std::size_t> pick(0, s.generators.size() - 1);
      return s.generators[pick(*rng)];
    }
  }
  throw precondition_error("select_subgradient: unknown rule");
}

PiecewiseSmoothFunction tilt(const PiecewiseSmoothFunction& f, const Vector& u) {
  if (u.size() != f.dim()) throw precondition_error("tilt: dimension mismatch");
  std::vector<PiecewiseSmoothFunction::entry> pieces;
  pieces.reserve(f.pieces().size());
  for (const auto& e : f.pieces()) pieces.push_back({e.region, e.piece.tilted(u)});
  return PiecewiseSmoothFunction(f.dim(), std::move(pieces), f.name());
}

vector_field smooth_representative_gradient(const PiecewiseSmoothFunction& f) {
  return [f](const Vector& x) {
    const int id = f.first_active_piece(x);
    if (id < 0) throw malformed_function("smooth representative: no region covers the point");
    return f.pieces()[static_cast<std::size_t>(id)].piece.gradient(x);
  };
}

// ---------------------------------------------------------------------------
// catalog

namespace {

sign_constraint axis(int d, int i, sign_requirement s) {
  sign_constraint c;
  c.normal = Vector::Unit(d, i);
  c.sign = s;
  return c;
}

sign_constraint functional(Vector normal, sign_requirement s) {
  sign_constraint c;
  c.normal = std::move(normal);
  c.sign = s;
  return c;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

PiecewiseSmoothFunction::entry linear_piece(Region r, Vector g) {
  const auto d = g.size();
  return {std::move(r), SmoothPiece::quadratic(0.0, std::move(g), Matrix::Zero(d, d))};
}

Problem double_abs() {
  using s = sign_requirement;
  std::vector<PiecewiseSmoothFunction::entry> p;
  p.push_back(linear_piece({{axis(2, 0, s::positive), axis(2, 1, s::positive)}}, vec2(-1, 1)));
  p.push_back(linear_piece({{axis(2, 0, s::negative), axis(2, 1, s::positive)}}, vec2(1, 1)));
  p.push_back(linear_piece({{axis(2, 0, s::negative), axis(2, 1, s::negative)}}, vec2(1, -1)));
  p.push_back(linear_piece({{axis(2, 0, s::positive), axis(2, 1, s::negative)}}, vec2(-1, -1)));
  return {"double_abs", PiecewiseSmoothFunction(2, std::move(p), "double_abs"),
          Manifold::point(Vector::Zero(2)), Vector::Zero(2)};
}

Problem sign_split_z(const std::string& name, double curvature_y, double z_weight) {
  using s = sign_requirement;
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = 2.0 * curvature_y;
  std::vector<PiecewiseSmoothFunction::entry> p;
  p.push_back({{{axis(2, 1, s::positive)}}, SmoothPiece::quadratic(0.0, vec2(0, z_weight), h)});
  p.push_back({{{axis(2, 1, s::negative)}}, SmoothPiece::quadratic(0.0, vec2(0, -z_weight), h)});
  return {name, PiecewiseSmoothFunction(2, std::move(p), name), Manifold::coordinate(2, 1),
          Vector::Zero(2)};
}

Problem quad_z() {
  Matrix h = Matrix::Zero(2, 2);
  h(1, 1) = 2.0;
  std::vector<PiecewiseSmoothFunction::entry> p;
  p.push_back({Region{}, SmoothPiece::quadratic(0.0, Vector::Zero(2), h)});
  return {"quad_z", PiecewiseSmoothFunction(2, std::move(p), "quad_z"),
          Manifold::coordinate(2, 1), Vector::Zero(2)};
}

Problem verdier_cone() {
  using s = sign_requirement;
  std::vector<PiecewiseSmoothFunction::entry> p;
  for (double sz : {1.0, -1.0}) {
    for (double sy : {1.0, -1.0}) {
      const auto ys = sy > 0 ? s::positive : s::negative;
      const auto zs = sz > 0 ? s::positive : s::negative;
      // |y| <= |z| : |z| + |y|
      p.push_back(linear_piece(
          {{axis(2, 0, ys), axis(2, 1, zs), functional(vec2(sy, -sz), s::negative)}},
          vec2(sy, sz)));
      // |y| >= |z| : 2|z|
      p.push_back(linear_piece(
          {{axis(2, 0, ys), axis(2, 1, zs), functional(vec2(sy, -sz), s::positive)}},
          vec2(0, 2 * sz)));
    }
  }
  return {"verdier_cone", PiecewiseSmoothFunction(2, std::move(p), "verdier_cone"),
          Manifold::coordinate(2, 1), Vector::Zero(2)};
}

}  // namespace

Problem separable(const Vector& a, const Vector& b) {
  const int k = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  const int d = k + m;
  if (d == 0) throw unknown_function("separable: empty coefficient vectors");
  if (m > 16) throw unknown_function("separable: too many absolute-value terms");
  for (int j = 0; j < m; ++j)
    if (!(b(j) > 0)) throw unknown_function("separable: absolute-value weights must be positive");
  Matrix h = Matrix::Zero(d, d);
  for (int i = 0; i < k; ++i) h(i, i) = 2.0 * a(i);
  std::vector<PiecewiseSmoothFunction::entry> p;
  for (int pattern = 0; pattern < (1 << m); ++pattern) {
    Region r;
    Vector g = Vector::Zero(d);
    for (int j = 0; j < m; ++j) {
      const bool negative = pattern & (1 << j);
      r.constraints.push_back(axis(d, k + j, negative ? sign_requirement::negative
                                                      : sign_requirement::positive));
      g(k + j) = negative ? -b(j) : b(j);
    }
    p.push_back({std::move(r), SmoothPiece::quadratic(0.0, std::move(g), h)});
  }
  return {"separable", PiecewiseSmoothFunction(d, std::move(p), "separable"),
          Manifold::coordinate(d, k), Vector::Zero(d)};
}

Problem builtin(const std::string& name, const builtin_params& params) {
  if (name == "saddle_abs") return sign_split_z(name, -1.0, 1.0);
  if (name == "neg_abs") return sign_split_z(name, -1.0, -1.0);
  if (name == "abs_z") return sign_split_z(name, 0.0, 1.0);
  if (name == "min_abs") return sign_split_z(name, 1.0, 1.0);
  if (name == "double_abs") return double_abs();
  if (name == "quad_z") return quad_z();
  if (name == "verdier_cone") return verdier_cone();
  if (name == "separable") return separable(params.a, params.b);
  throw unknown_function("unknown catalog function '" + name + "'");
}

std::vector<std::string> catalog_names() {
  return {"saddle_abs", "double_abs", "neg_abs", "abs_z", "quad_z",
          "min_abs", "verdier_cone", "separable"};
}

}  // namespace saddlelab
