#include "saddlelab/center_stable.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include <boost/numeric/odeint.hpp>

#include "saddlelab/errors.hpp"
#include "saddlelab/random.hpp"

namespace saddlelab {

namespace {

constexpr double kDefectiveCondition = 1e8;
constexpr double kSplitTolerance = 1e-8;

}  // namespace

SpectralSplit spectral_split(const Matrix& J, double tol_gap) {
  if (J.rows() != J.cols() || J.rows() == 0) throw precondition_error("spectral_split: J must be square");
  const Eigen::Index d = J.rows();
  Eigen::EigenSolver<Matrix> es(J, true);
  if (es.info() != Eigen::Success) throw near_defective("spectral_split: eigen decomposition failed");
  const Eigen::VectorXcd lambda = es.eigenvalues();
  const Eigen::MatrixXcd V = es.eigenvectors();

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                               : std::numeric_limits<double>::infinity();
  if (!(cond <= kDefectiveCondition)) throw near_defective("spectral_split: eigenvector matrix is ill-conditioned");

  const double scale = std::max(1.0, J.norm());
  std::vector<Vector> plus_cols, minus_cols;
  int n_minus = 0;
  for (Eigen::Index k = 0; k < d; ++k) {
    const double re = lambda(k).real();
    const double im = lambda(k).imag();
    if (re > -tol_gap && re < 0.0) throw spectral_gap_violation("spectral_split: eigenvalue too close to the imaginary axis");
    auto& bucket = re < -tol_gap ? minus_cols : plus_cols;
    if (re < -tol_gap) ++n_minus;
    const Eigen::VectorXcd v = V.col(k);
    if (std::abs(im) <= 1e-12 * scale) {
      Vector col = v.real();
      if (col.norm() < 1e-12) col = v.imag();
      bucket.push_back(col / col.norm());
    } else if (im > 0.0) {
      // J (a + ib) = (re + i im)(a + ib) gives the block [[re, im], [-im, re]] on [a, b].
      bucket.push_back(v.real());
      bucket.push_back(v.imag());
    }
  }
  if (n_minus == 0) throw no_negative_eigenvalue("spectral_split: no eigenvalue with negative real part");

  const auto d_plus = static_cast<Eigen::Index>(plus_cols.size());
  const auto d_minus = static_cast<Eigen::Index>(minus_cols.size());
  SpectralSplit out;
  out.P.resize(d, d);
  for (Eigen::Index k = 0; k < d_plus; ++k) out.P.col(k) = plus_cols[static_cast<std::size_t>(k)];
  for (Eigen::Index k = 0; k < d_minus; ++k) out.P.col(d_plus + k) = minus_cols[static_cast<std::size_t>(k)];

  Eigen::FullPivLU<Matrix> lu(out.P);
  if (!lu.isInvertible()) throw near_defective("spectral_split: real eigenbasis is singular");
  const Matrix B = lu.solve(J * out.P);
  out.J_plus = B.topLeftCorner(d_plus, d_plus);
  out.J_minus = B.bottomRightCorner(d_minus, d_minus);

  Matrix block = Matrix::Zero(d, d);
  block.topLeftCorner(d_plus, d_plus) = out.J_plus;
  block.bottomRightCorner(d_minus, d_minus) = out.J_minus;
  const double err = (out.P * block * lu.inverse() - J).norm();
  if (!(err <= kSplitTolerance * scale)) throw near_defective("spectral_split: block factorization does not reproduce J");

  out.E_minus_basis = orthonormal_span(out.P.rightCols(d_minus));
  out.E_plus_basis = d_plus > 0 ? orthonormal_span(out.P.leftCols(d_plus)) : Matrix(d, 0);
  out.eigenvalues = lambda;
  out.eigenvector_condition = cond;
  return out;
}

LyapunovCertificate lyapunov_solve(const Matrix& J_minus) {
  if (J_minus.rows() != J_minus.cols() || J_minus.rows() == 0)
    throw precondition_error("lyapunov_solve: J_minus must be square");
  const Eigen::Index m = J_minus.rows();
  const Eigen::VectorXcd lambda = J_minus.eigenvalues();
  for (Eigen::Index i = 0; i < m; ++i)
    if (!(lambda(i).real() < 0.0)) throw precondition_error("lyapunov_solve: J_minus is not stable");
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (std::abs(lambda(i) + lambda(j)) < 1e-12) throw singular_system("lyapunov_solve: eigenvalue sums collide");

  // vec(Q J) = (J' kron I) vec Q and vec(J' Q) = (I kron J') vec Q, column-major.
  const Matrix Jt = J_minus.transpose();
  const Eigen::Index n = m * m;
  Matrix K = Matrix::Zero(n, n);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) {
      const double jt = Jt(a, b);
      for (Eigen::Index i = 0; i < m; ++i) {
        K(a * m + i, b * m + i) += jt;  // Jt kron I
      }
    }
  for (Eigen::Index blk = 0; blk < m; ++blk) K.block(blk * m, blk * m, m, m) += Jt;  // I kron Jt
  Vector rhs = Vector::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) rhs(i * m + i) = -2.0;

  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) throw singular_system("lyapunov_solve: Kronecker system is singular");
  Vector q = lu.solve(rhs);
  q += lu.solve(rhs - K * q);  // one refinement sweep

  LyapunovCertificate cert;
  cert.Q = Eigen::Map<const Matrix>(q.data(), m, m);
  cert.Q = 0.5 * (cert.Q + cert.Q.transpose()).eval();
  cert.residual = (cert.Q * J_minus + Jt * cert.Q + 2.0 * Matrix::Identity(m, m)).norm();
  Eigen::SelfAdjointEigenSolver<Matrix> es(cert.Q);
  cert.lambda_min = es.eigenvalues()(0);
  cert.lambda_max = es.eigenvalues()(m - 1);
  return cert;
}

// ---------------------------------------------------------------------------
// polynomial maps

PolynomialMap::PolynomialMap(int in_dim, int out_dim, std::vector<monomial> terms)
    : in_(in_dim), out_(out_dim), terms_(std::move(terms)) {
  if (in_ < 0 || out_ < 0) throw invalid_manifold_spec("PolynomialMap: negative dimension");
  for (const auto& t : terms_) {
    if (t.output < 0 || t.output >= out_) throw invalid_manifold_spec("PolynomialMap: output index out of range");
    if (static_cast<int>(t.exponents.size()) != in_)
      throw invalid_manifold_spec("PolynomialMap: exponent vector has the wrong length");
    for (int e : t.exponents)
      if (e < 0) throw invalid_manifold_spec("PolynomialMap: negative exponent");
  }
}

Vector PolynomialMap::operator()(const Vector& u) const {
  Vector out = Vector::Zero(out_);
  for (const auto& t : terms_) {
    double v = t.coefficient;
    for (int i = 0; i < in_; ++i) v *= std::pow(u(i), t.exponents[static_cast<std::size_t>(i)]);
    out(t.output) += v;
  }
  return out;
}

Matrix PolynomialMap::jacobian(const Vector& u) const {
  Matrix out = Matrix::Zero(out_, in_);
  for (const auto& t : terms_) {
    for (int k = 0; k < in_; ++k) {
      const int ek = t.exponents[static_cast<std::size_t>(k)];
      if (ek == 0) continue;
      double v = t.coefficient * ek;
      for (int i = 0; i < in_; ++i) {
        const int e = t.exponents[static_cast<std::size_t>(i)] - (i == k ? 1 : 0);
        v *= std::pow(u(i), e);
      }
      out(t.output, k) += v;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// constructed systems

ConstructedSystem build_system(const Matrix& J_plus, const Matrix& J_minus, const PolynomialMap& G,
                               const DeltaSpec& delta, const std::optional<Matrix>& P) {
  const auto dp = static_cast<int>(J_plus.rows());
  const auto dm = static_cast<int>(J_minus.rows());
  if (J_plus.cols() != dp || J_minus.cols() != dm) throw invalid_manifold_spec("build_system: blocks must be square");
  if (dm == 0) throw invalid_manifold_spec("build_system: need at least one unstable direction");
  if (G.in_dim() != dp || G.out_dim() != dm) throw invalid_manifold_spec("build_system: G has the wrong shape");
  const Vector origin = Vector::Zero(dp);
  if (G(origin).norm() != 0.0) throw invalid_manifold_spec("build_system: G(0) must vanish");
  if (G.jacobian(origin).norm() != 0.0) throw invalid_manifold_spec("build_system: the Jacobian of G must vanish at 0");
  if (!(delta.gain >= 0.0) || !(delta.saturation >= 0.0)) throw invalid_manifold_spec("build_system: bad Delta spec");

  ConstructedSystem s;
  s.d_plus_ = dp;
  s.d_minus_ = dm;
  s.j_plus_ = J_plus;
  s.j_minus_ = J_minus;
  const int d = dp + dm;
  s.p_ = P ? *P : Matrix::Identity(d, d);
  if (s.p_.rows() != d || s.p_.cols() != d) throw invalid_manifold_spec("build_system: P has the wrong shape");
  Eigen::FullPivLU<Matrix> lu(s.p_);
  if (!lu.isInvertible()) throw invalid_manifold_spec("build_system: P is singular");
  s.p_inv_ = lu.inverse();
  s.g_ = G;
  s.delta_ = delta;
  s.cert_ = lyapunov_solve(J_minus);
  return s;
}

Matrix ConstructedSystem::e_minus_basis() const { return orthonormal_span(p_.rightCols(d_minus_)); }

Matrix ConstructedSystem::e_plus_basis() const {
  if (d_plus_ == 0) return Matrix(dim(), 0);
  return orthonormal_span(p_.leftCols(d_plus_));
}

Vector ConstructedSystem::to_w(const Vector& y) const {
  Vector yb = p_inv_ * y;
  Vector w = yb;
  w.tail(d_minus_) -= g_(yb.head(d_plus_));
  return w;
}

Vector ConstructedSystem::from_w(const Vector& w) const {
  Vector yb = w;
  yb.tail(d_minus_) += g_(w.head(d_plus_));
  return p_ * yb;
}

Matrix ConstructedSystem::delta(const Vector& w) const {
  const double s = delta_.gain * std::min(w.norm(), delta_.saturation);
  return s * Matrix::Identity(d_minus_, d_minus_);
}

Vector ConstructedSystem::drift(const Vector& y) const {
  const Vector yb = p_inv_ * y;
  const Vector up = yb.head(d_plus_);
  Vector w = yb;
  w.tail(d_minus_) -= g_(up);
  Vector db(dim());
  const Vector jp = j_plus_ * up;
  db.head(d_plus_) = jp;
  db.tail(d_minus_) = (j_minus_ - delta(w)) * w.tail(d_minus_) + g_.jacobian(up) * jp;
  return p_ * db;
}

double manifold_invariance_defect(const ConstructedSystem& sys, const std::vector<Vector>& w_plus_starts,
                                  double t_end) {
  namespace ode = boost::numeric::odeint;
  using state = std::vector<double>;
  const int d = sys.dim();
  auto rhs = [&](const state& y, state& dydt, double) {
    const Vector v = -sys.drift(Eigen::Map<const Vector>(y.data(), d));
    std::copy(v.data(), v.data() + d, dydt.begin());
  };
  double worst = 0.0;
  for (const auto& wp : w_plus_starts) {
    if (wp.size() != sys.d_plus()) throw precondition_error("manifold_invariance_defect: start has the wrong size");
    Vector w = Vector::Zero(d);
    w.head(sys.d_plus()) = wp;
    const Vector y0 = sys.from_w(w);
    state y(y0.data(), y0.data() + d);
    auto observe = [&](const state& s, double) {
      const Vector wm = sys.to_w(Eigen::Map<const Vector>(s.data(), d)).tail(sys.d_minus());
      worst = std::max(worst, wm.norm());
    };
    ode::integrate_const(ode::make_dense_output(1e-13, 1e-13, ode::runge_kutta_dopri5<state>()), rhs, y,
                         0.0, t_end, t_end / 100.0, observe);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// abstract recursion

namespace {

struct abstract_step {
  std::int64_t n;             // iterate index of the step origin
  double gamma;
  const Vector& y_next;       // original coordinates
  const Vector& w_next;
  double U_next;
  const Vector& eta, & rho, & rho_tilde;
  const Vector& e, & r, & r_tilde;
  double delta_scale;         // H_n = -J- + delta_scale I
  double identity_error;
};

std::vector<std::string> contract_flags(const ConstructedSystem& sys, const AbstractConfig& cfg) {
  std::vector<std::string> flags;
  bool e_reaches = cfg.e_noise.type() != NoiseModel::kind::zero && cfg.e_noise.sigma() > 0.0;
  if (e_reaches && cfg.e_noise.type() == NoiseModel::kind::subspace_restricted) {
    const Matrix pb = sys.e_minus_basis().transpose() * cfg.e_noise.basis();
    if (pb.norm() < 1e-12) e_reaches = false;
  }
  if (!e_reaches) flags.push_back("e_misses_unstable_directions");
  if (cfg.rho.scale > 0.0 && !(cfg.rho.decay > 0.5)) flags.push_back("r_not_square_summable");
  if (cfg.rho_tilde.scale > 0.0 && !(cfg.rho_tilde.decay >= 0.5)) flags.push_back("r_tilde_tail_too_heavy");
  return flags;
}

template <class OnStep>
bool drive_abstract(const ConstructedSystem& sys, const AbstractConfig& cfg, std::uint64_t seed,
                    OnStep&& on_step) {
  const int d = sys.dim();
  const int dp = sys.d_plus();
  const int dm = sys.d_minus();
  const Matrix Pinv = sys.P().inverse();
  const Matrix& Q = sys.certificate().Q;
  const bool has_g = !sys.G().terms().empty();
  rng_t rng = substream(seed, 0);

  Vector y = cfg.y0, yb = Pinv * y, y_next(d), yb_next(d);
  Vector w = sys.to_w(y), w_next(d);
  Vector eta = Vector::Zero(d), rho = Vector::Zero(d), rho_t = Vector::Zero(d);
  Vector eb(d), rb(d), rtb(d), db(d), jp(dp);
  Vector e(dm), r(dm), rt(dm), pred(dm), xi(dm), qw(dm);
  Matrix JG = Matrix::Zero(dm, dp);

  for (std::int64_t n = 1; n <= cfg.horizon; ++n) {
    const double g = cfg.schedule.gamma(n);
    cfg.e_noise.sample(rng, eta);
    if (cfg.rho.scale > 0.0) {
      cfg.rho.shape.sample(rng, rho);
      rho *= cfg.rho.scale * std::pow(static_cast<double>(n), -cfg.rho.decay);
    }
    if (cfg.rho_tilde.scale > 0.0) {
      cfg.rho_tilde.shape.sample(rng, rho_t);
      rho_t *= cfg.rho_tilde.scale * std::pow(static_cast<double>(n), -cfg.rho_tilde.decay);
    }
    eb.noalias() = Pinv * eta;
    rb.noalias() = Pinv * rho;
    rtb.noalias() = Pinv * rho_t;

    const double ds = sys.delta_spec().gain * std::min(w.norm(), sys.delta_spec().saturation);
    jp.noalias() = sys.J_plus() * yb.head(dp);
    if (has_g) JG = sys.G().jacobian(yb.head(dp));
    db.head(dp) = jp;
    db.tail(dm).noalias() = sys.J_minus() * w.tail(dm);
    db.tail(dm) -= ds * w.tail(dm);
    if (has_g) db.tail(dm).noalias() += JG * jp;
    for (int i = 0; i < d; ++i) yb_next(i) = yb(i) - g * db(i) + g * (eb(i) + rb(i) + rtb(i));
    y_next.noalias() = sys.P() * yb_next;
    w_next = yb_next;
    if (has_g) w_next.tail(dm) -= sys.G()(yb_next.head(dp));

    e = eb.tail(dm);
    r = rb.tail(dm);
    rt = rtb.tail(dm);
    if (has_g) {
      e.noalias() -= JG * eb.head(dp);
      r.noalias() -= JG * rb.head(dp);
      rt.noalias() -= JG * rtb.head(dp);
      xi = sys.G()(yb_next.head(dp)) - sys.G()(yb.head(dp));
      xi.noalias() -= JG * (yb_next.head(dp) - yb.head(dp));
      r -= xi / g;
    }
    pred.noalias() = -(sys.J_minus() * w.tail(dm));
    pred += ds * w.tail(dm);
    pred = w.tail(dm) + g * pred + g * (e + r + rt);
    const double id_err = (pred - w_next.tail(dm)).norm();
    qw.noalias() = Q * w_next.tail(dm);
    const double U_next = std::sqrt(std::max(0.0, w_next.tail(dm).dot(qw)));

    const abstract_step view{n, g, y_next, w_next, U_next, eta, rho, rho_t, e, r, rt, ds, id_err};
    if (!on_step(view)) return true;
    if (!y_next.allFinite()) return false;
    y.swap(y_next);
    yb.swap(yb_next);
    w.swap(w_next);
  }
  return true;
}

double u_of(const ConstructedSystem& sys, const Vector& w) {
  const auto wm = w.tail(sys.d_minus());
  return std::sqrt(std::max(0.0, wm.dot(sys.certificate().Q * wm)));
}

}  // namespace

AbstractRun simulate_abstract(const ConstructedSystem& sys, const AbstractConfig& cfg, std::uint64_t seed) {
  const int d = sys.dim();
  const int dm = sys.d_minus();
  if (cfg.y0.size() != d) throw precondition_error("simulate_abstract: y0 has the wrong size");
  if (cfg.horizon < 1) throw precondition_error("simulate_abstract: horizon must be positive");
  if (cfg.tau_start < 1) throw precondition_error("simulate_abstract: tau start must be >= 1");
  if (!(cfg.L > 0.0)) throw precondition_error("simulate_abstract: L must be positive");

  AbstractRun run;
  run.seed = seed;
  run.contract_flags = contract_flags(sys, cfg);
  const std::int64_t N = cfg.horizon;
  run.chi = chi_table(cfg.schedule, N + 1);
  run.gamma.reserve(static_cast<std::size_t>(N));
  run.y.resize(d, N + 1);
  run.w.resize(d, N + 1);
  run.U.assign(static_cast<std::size_t>(N + 1) + 1, 0.0);
  run.e.resize(dm, N);
  run.r.resize(dm, N);
  run.r_tilde.resize(dm, N);
  run.H.resize(dm * dm, N);
  run.eta_tilde.resize(d, N);
  run.rho.resize(d, N);
  run.rho_tilde.resize(d, N);

  // Column k holds iterate k + 1; U[n] holds U_n.
  run.y.col(0) = cfg.y0;
  run.w.col(0) = sys.to_w(cfg.y0);
  run.U[1] = u_of(sys, run.w.col(0));
  auto check_tau = [&](std::int64_t n) {
    if (!run.tau && n >= cfg.tau_start && run.U[static_cast<std::size_t>(n)] * run.U[static_cast<std::size_t>(n)] >=
                                              cfg.L * run.chi[static_cast<std::size_t>(n)])
      run.tau = n;
  };
  check_tau(1);
  std::int64_t last = 1;
  drive_abstract(sys, cfg, seed, [&](const abstract_step& s) {
    const auto k = s.n - 1;
    run.gamma.push_back(s.gamma);
    run.e.col(k) = s.e;
    run.r.col(k) = s.r;
    run.r_tilde.col(k) = s.r_tilde;
    Matrix H = -sys.J_minus();
    H.diagonal().array() += s.delta_scale;
    run.H.col(k) = Eigen::Map<const Vector>(H.data(), dm * dm);
    run.eta_tilde.col(k) = s.eta;
    run.rho.col(k) = s.rho;
    run.rho_tilde.col(k) = s.rho_tilde;
    run.y.col(k + 1) = s.y_next;
    run.w.col(k + 1) = s.w_next;
    run.U[static_cast<std::size_t>(s.n + 1)] = s.U_next;
    run.max_identity_error = std::max(run.max_identity_error, s.identity_error);
    last = s.n + 1;
    check_tau(s.n + 1);
    if (!s.y_next.allFinite() || s.y_next.norm() > cfg.escape_radius) {
      run.escaped = true;
      return false;
    }
    return true;
  });
  const std::int64_t steps = last - 1;
  run.y.conservativeResize(Eigen::NoChange, steps + 1);
  run.w.conservativeResize(Eigen::NoChange, steps + 1);
  run.U.resize(static_cast<std::size_t>(steps + 2));
  run.e.conservativeResize(Eigen::NoChange, steps);
  run.r.conservativeResize(Eigen::NoChange, steps);
  run.r_tilde.conservativeResize(Eigen::NoChange, steps);
  run.H.conservativeResize(Eigen::NoChange, steps);
  run.eta_tilde.conservativeResize(Eigen::NoChange, steps);
  run.rho.conservativeResize(Eigen::NoChange, steps);
  run.rho_tilde.conservativeResize(Eigen::NoChange, steps);
  return run;
}

PathwiseReport pathwise_inequality_probe(const AbstractRun& run, const ConstructedSystem& sys, double L,
                                         std::optional<double> user_c) {
  const auto& cert = sys.certificate();
  const Matrix& Q = cert.Q;
  const int dm = sys.d_minus();
  PathwiseReport rep;
  rep.a_norm_bound = cert.lambda_max / std::sqrt(cert.lambda_min);
  Vector a(dm), s(dm);
  for (std::int64_t k = 0; k < run.steps(); ++k) {
    const std::int64_t n = k + 1;
    const double g = run.gamma[static_cast<std::size_t>(k)];
    const double u0 = run.U[static_cast<std::size_t>(n)];
    const double u1 = run.U[static_cast<std::size_t>(n + 1)];
    s = run.e.col(k) + run.r.col(k) + run.r_tilde.col(k);
    if (u0 > 0.0) {
      a.noalias() = Q * run.w.col(k).tail(dm);
      a /= u0;
    } else {
      const double sq = std::sqrt(std::max(0.0, s.dot(Q * s)));
      if (sq > 0.0) {
        a.noalias() = Q * s;
        a /= sq;
      } else {
        // any Q-unit vector
        a = Q.col(0) / std::sqrt(Q(0, 0));
      }
    }
    const double tol = 1e-12 * std::max(1.0, std::max(u0, u1));
    if (u1 - u0 < g * a.dot(s) - tol) ++rep.lower_violations;
    const double an = a.norm();
    rep.max_a_norm = std::max(rep.max_a_norm, an);
    if (an > rep.a_norm_bound * (1.0 + 1e-12)) ++rep.a_norm_violations;

    Matrix H = Eigen::Map<const Matrix>(run.H.col(k).data(), dm, dm);
    if ((Q * (H + sys.J_minus())).operatorNorm() > 0.5) ++rep.standing_assumption_violations;

    if (u0 * u0 <= L * run.chi[static_cast<std::size_t>(n)]) {
      ++rep.below_threshold_steps;
      const double denom = g * g * (L + run.e.col(k).squaredNorm() + run.r.col(k).squaredNorm() +
                                    run.r_tilde.col(k).squaredNorm());
      const double ratio = (u1 - u0) * (u1 - u0) / denom;
      rep.fitted_c = std::max(rep.fitted_c, ratio);
      if (user_c && ratio > *user_c) ++rep.upper_violations;
    }
    ++rep.steps_checked;
  }
  return rep;
}

NonconvergenceStats nonconvergence_experiment(const ConstructedSystem& sys, const AbstractConfig& cfg,
                                              std::uint64_t master_seed, int n_runs, double epsilon,
                                              execution exec) {
  if (n_runs < 1) throw precondition_error("nonconvergence_experiment: need at least one run");
  if (!(epsilon > 0.0)) throw precondition_error("nonconvergence_experiment: epsilon must be positive");
  if (cfg.y0.size() != sys.dim()) throw precondition_error("nonconvergence_experiment: y0 has the wrong size");
  if (cfg.horizon < 1 || cfg.tau_start < 1 || !(cfg.L > 0.0))
    throw precondition_error("nonconvergence_experiment: bad horizon, tau start or L");
  const std::vector<double> chi = chi_table(cfg.schedule, cfg.horizon + 1);
  const std::int64_t last = cfg.horizon + 1;
  const std::int64_t tail_from = last - std::max<std::int64_t>(1, (cfg.horizon + 1) / 10) + 1;

  NonconvergenceStats st;
  st.n_runs = n_runs;
  st.epsilon = epsilon;
  st.runs.resize(static_cast<std::size_t>(n_runs));
  for_each_index(static_cast<std::size_t>(n_runs), [&](std::size_t i) {
    auto& rec = st.runs[i];
    rec.seed = master_seed + i;
    double floor = 0.0;
    bool above = true;
    double tail_max = 0.0;
    auto visit = [&](std::int64_t n, double U, double ynorm) {
      if (!rec.tau && n >= cfg.tau_start && U * U >= cfg.L * chi[static_cast<std::size_t>(n)]) {
        rec.tau = n;
        floor = 0.5 * std::sqrt(cfg.L * chi[static_cast<std::size_t>(n)]);
      }
      if (rec.tau && U < floor) above = false;
      if (n >= tail_from) tail_max = std::max(tail_max, ynorm);
    };
    visit(1, u_of(sys, sys.to_w(cfg.y0)), cfg.y0.norm());
    drive_abstract(sys, cfg, rec.seed, [&](const abstract_step& s) {
      const double yn = s.y_next.norm();
      visit(s.n + 1, s.U_next, yn);
      if (!std::isfinite(yn) || yn > cfg.escape_radius) {
        rec.escaped = true;
        return false;
      }
      return true;
    });
    rec.tail_max_y = rec.escaped ? std::numeric_limits<double>::infinity() : tail_max;
    rec.stays_above = rec.tau.has_value() && above;
    rec.converges = !rec.escaped && tail_max < epsilon;
  }, exec);

  int tau_finite = 0, stays = 0, conv = 0;
  for (const auto& r : st.runs) {
    tau_finite += r.tau ? 1 : 0;
    stays += r.stays_above ? 1 : 0;
    conv += r.converges ? 1 : 0;
  }
  st.p_tau_finite = static_cast<double>(tau_finite) / n_runs;
  st.p_stays_above = static_cast<double>(stays) / n_runs;
  st.p_converges = static_cast<double>(conv) / n_runs;
  return st;
}

}  // namespace saddlelab
