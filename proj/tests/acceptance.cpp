// One line per acceptance criterion: "PASS|FAIL <n> <name>: <details>".
// Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "saddlelab/app.hpp"
#include "saddlelab/center_stable.hpp"
#include "saddlelab/conditions.hpp"
#include "saddlelab/dynamics.hpp"
#include "saddlelab/errors.hpp"
#include "saddlelab/geometry.hpp"
#include "saddlelab/random.hpp"

using namespace saddlelab;
namespace fs = std::filesystem;

namespace {

using clock_type = std::chrono::steady_clock;

struct outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<outcome()>& body) {
  const auto t0 = clock_type::now();
  outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s [%.3f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Matrix mat(int r, int c, std::initializer_list<double> v) {
  Matrix m(r, c);
  auto it = v.begin();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

bool has_generator(const SubgradientSet& s, const Vector& g) {
  for (const auto& v : s.generators)
    if ((v - g).norm() == 0.0) return true;
  return false;
}

SGDConfig escape_config(const Problem& p, std::int64_t horizon) {
  SGDConfig cfg;
  cfg.f = p.f;
  cfg.manifold = p.manifold;
  cfg.x_star = p.critical_point;
  cfg.x0 = vec({0.0, 0.3});
  cfg.schedule = StepSchedule(0.05, 0.7);
  cfg.noise = NoiseModel::sphere_uniform(0.5);
  cfg.horizon = horizon;
  cfg.radius = 0.5;
  cfg.master_seed = 2024;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

int main() {
  const Vector origin = Vector::Zero(2);

  criterion(1, "Clarke oracle", [&] {
    const Problem p = builtin("saddle_abs");
    const auto t0 = clock_type::now();
    const SubgradientSet s = clarke_generators(p.f, vec({0.5, 0.0}));
    const Vector mn = min_norm_subgradient(p.f, vec({0.5, 0.0}));
    const Vector m0 = min_norm_subgradient(p.f, origin);
    const double t = seconds_since(t0);
    const bool ok = s.generators.size() == 2 && has_generator(s, vec({-1.0, 1.0})) &&
                    has_generator(s, vec({-1.0, -1.0})) && (mn - vec({-1.0, 0.0})).norm() == 0.0 &&
                    m0.norm() == 0.0 && t < 1e-3;
    return outcome{ok, "generators {(-1,1),(-1,-1)}, min_norm (-1,0), at 0 (0,0); oracle time " +
                           fmt("%.2e s", t)};
  });

  criterion(2, "Riemannian calculus", [&] {
    const Problem p = builtin("saddle_abs");
    const auto t0 = clock_type::now();
    const vector_field grad = smooth_representative_gradient(p.f);
    const Vector g = riem_gradient(grad, p.manifold, vec({0.5, 0.0}));
    const Matrix h = riem_hessian(grad, p.manifold, origin);
    const double t = seconds_since(t0);
    const double ge = (g - vec({-1.0, 0.0})).norm();
    const double he = h.rows() == 1 ? std::abs(h(0, 0) + 2.0) : INFINITY;
    return outcome{ge <= 1e-8 && he <= 1e-4 && t < 1e-2,
                   "|grad - (-1,0)| = " + fmt("%.1e", ge) + ", |hess + 2| = " + fmt("%.1e", he) + ", time " +
                       fmt("%.2e s", t)};
  });

  // Hand derivations for f = -y^2 + |z|, M = {z = 0}, off M the gradient is (-2y, sign z):
  //   angle      <(-2y, sign z), (0, sign z)> / |(0, z)| ... = 1
  //   sharpness  |(-2y, +-1)| >= 1 with infimum 1 at y -> 0
  //   Verdier    2 |y - a| / |x - (a, 0)| <= 2, approached when z << |y - a|
  // and for -y^2 - |z| the angle ratio is -1.
  criterion(3, "condition certifiers", [&] {
    const Problem s = builtin("saddle_abs");
    const Problem n = builtin("neg_abs");
    double worst = 0.0;
    auto timed = [&](auto&& f) {
      const auto t0 = clock_type::now();
      auto r = f();
      worst = std::max(worst, seconds_since(t0));
      return r;
    };
    const auto beta = timed([&] { return estimate_angle_beta(s.f, s.manifold, origin, 0.1, 4000, 1); });
    const auto neg = timed([&] { return estimate_angle_beta(n.f, n.manifold, origin, 0.1, 4000, 1); });
    const auto ver = timed([&] { return estimate_verdier_constant(s.f, s.manifold, origin, 0.1, 10000, 1); });
    const auto sh = timed([&] { return estimate_sharpness(s.f, s.manifold, origin, 0.1, 4000, 1); });
    const bool ok = beta.estimate >= 0.999 && beta.estimate <= 1.0 && neg.estimate <= -0.999 &&
                    neg.outcome == verdict::fails && ver.estimate >= 1.9 && ver.estimate <= 2.0 &&
                    sh.estimate >= 0.999 && sh.estimate <= 1.05 && worst < 1.0;
    return outcome{ok, "beta " + fmt("%.6f", beta.estimate) + ", neg_abs beta " + fmt("%.6f", neg.estimate) +
                           " (" + to_string(neg.outcome) + "), Verdier " + fmt("%.6f", ver.estimate) +
                           ", sharpness " + fmt("%.6f", sh.estimate) + ", slowest " + fmt("%.3f s", worst)};
  });

  criterion(4, "weak convexity chain", [&] {
    const auto t0 = clock_type::now();
    const box dom{vec({-1.0, -1.0}), vec({1.0, 1.0})};
    const std::vector<double> grid{0.5, 1.0, 2.0};
    const auto sa = estimate_weak_convexity_rho(builtin("saddle_abs").f, dom, grid, 4000, 6);
    const auto da = estimate_weak_convexity_rho(builtin("double_abs").f, dom, grid, 4000, 6);
    bool chain = true;
    std::string held;
    for (const auto& name : catalog_names()) {
      builtin_params params;
      if (name == "separable") params = {vec({-1.0, 0.5}), vec({1.0, 2.0})};
      const Problem p = builtin(name, params);
      const int d = p.f.dim();
      const box b{Vector::Constant(d, -1.0), Vector::Constant(d, 1.0)};
      if (estimate_weak_convexity_rho(p.f, b, grid, 2000, 7).outcome != verdict::holds) continue;
      const auto a = estimate_angle_beta(p.f, p.manifold, p.critical_point, 0.1, 2000, 7);
      held += " " + name + "(" + to_string(a.outcome) + ")";
      chain = chain && a.outcome == verdict::holds;
    }
    const double t = seconds_since(t0);
    const bool ok = sa.estimate == 1.0 && sa.outcome == verdict::holds && da.outcome == verdict::fails &&
                    da.witness.size() == grid.size() && chain && t < 5.0;
    return outcome{ok, "saddle_abs rho " + fmt("%g", sa.estimate) + ", double_abs " + to_string(da.outcome) +
                           " at every grid rho; weakly convex -> angle:" + held};
  });

  criterion(5, "classifier", [&] {
    auto kind = [&](const char* name, std::uint64_t seed) {
      const Problem p = builtin(name);
      return classify_critical_point(p.f, p.manifold, origin, 0.1, 1e-6, 4000, seed);
    };
    const auto a = kind("saddle_abs", 5), b = kind("double_abs", 5), c = kind("min_abs", 5);
    const auto a2 = kind("saddle_abs", 5), b2 = kind("double_abs", 5), c2 = kind("min_abs", 5);
    const bool det = a.kind == a2.kind && b.kind == b2.kind && c.kind == c2.kind &&
                     a.sharpness.estimate == a2.sharpness.estimate && b.angle.estimate == b2.angle.estimate &&
                     c.sharpness.estimate == c2.sharpness.estimate;
    const bool ok = a.kind == critical_point_class::active_strict_saddle &&
                    b.kind == critical_point_class::sharply_repulsive &&
                    c.kind == critical_point_class::local_min_candidate && det;
    return outcome{ok, "saddle_abs " + to_string(a.kind) + ", double_abs " + to_string(b.kind) +
                           ", y^2+|z| " + to_string(c.kind) + (det ? ", repeatable" : ", NOT repeatable")};
  });

  criterion(6, "escape contrast", [&] {
    const auto t0 = clock_type::now();
    const Problem p = builtin("saddle_abs");
    SGDConfig cfg = escape_config(p, 100000);
    const EscapeStats omni = monte_carlo(cfg, 200);
    Matrix off_unstable(2, 1);
    off_unstable << 0.0, 1.0;
    cfg.noise = NoiseModel::subspace_restricted(NoiseModel::sphere_uniform(0.5), off_unstable);
    const EscapeStats restricted = monte_carlo(cfg, 200);
    const double t = seconds_since(t0);
    const double gap = omni.fraction_escaped - restricted.fraction_escaped;
    const bool ok = gap >= 0.9 && restricted.fraction_at_saddle == 1.0 && t < 120.0;
    return outcome{ok, "escaped " + fmt("%.3f", omni.fraction_escaped) + " vs " +
                           fmt("%.3f", restricted.fraction_escaped) + " (gap " + fmt("%.3f", gap) +
                           "), restricted at_saddle " + fmt("%.3f", restricted.fraction_at_saddle)};
  });

  criterion(7, "drift inequality", [&] {
    const auto t0 = clock_type::now();
    const Problem p = builtin("saddle_abs");
    const double sigma = 0.5;
    const Vector normal = vec({0.0, 1.0});
    std::vector<Vector> grid;
    for (double z : {0.01, 0.0325, 0.055, 0.0775, 0.1}) {
      grid.push_back(p.critical_point + z * normal);
      grid.push_back(p.critical_point - z * normal);
    }
    drift_options o;
    o.beta = 1.0;
    o.user_c = 10.0 * (sigma * sigma + 1.0);
    o.n_mc = 10000;
    o.seed = 31;
    const DriftReport r = drift_probe(p.f, p.manifold, grid, {1e-2, 1e-3}, NoiseModel::sphere_uniform(sigma), o);
    const double t = seconds_since(t0);
    const bool ok = r.violations == 0 && r.fitted_c <= o.user_c && t < 30.0;
    return outcome{ok, std::to_string(r.probes.size()) + " probes, " + std::to_string(r.violations) +
                           " violations, fitted C " + fmt("%.4f", r.fitted_c) + " <= " + fmt("%g", o.user_c)};
  });

  // Rates and tails are checked on the saddle_abs escape ensemble and on
  // y^2 + |z|. On saddle_abs every run exits and z_n is zero afterwards, so
  // the second ensemble is the one whose iterates stay inside the ball.
  const Problem min_abs = builtin("min_abs");
  SGDConfig rate_cfg = escape_config(min_abs, 100000);
  rate_cfg.x0 = vec({0.1, 0.1});
  EnsembleSeries ensemble;
  EnsembleSeries saddle_ensemble;

  criterion(8, "rate", [&] {
    ensemble = ensemble_z_series(rate_cfg, 100);
    saddle_ensemble = ensemble_z_series(escape_config(builtin("saddle_abs"), 100000), 100);
    const RateReport r = rate_diagnostic(ensemble, 0.2, {1000, 100000});
    const RateReport s = rate_diagnostic(saddle_ensemble, 0.2, {1000, 100000});
    bool rejected = false;
    try {
      rate_diagnostic(ensemble, 0.5, {1000, 100000});
    } catch (const invalid_exponent&) {
      rejected = true;
    }
    const double ratio = r.series[1].value / r.series[0].value;
    const bool saddle_ok = s.series[1].value <= 0.2 * s.series[0].value;
    return outcome{ratio <= 0.2 && saddle_ok && rejected,
                   "y^2+|z| ratio " + fmt("%.4f", ratio) + " (n^a E|z|^2: " + fmt("%.4e", r.series[0].value) +
                       " -> " + fmt("%.4e", r.series[1].value) + "); saddle_abs " +
                       fmt("%.4e", s.series[0].value) + " -> " + fmt("%.4e", s.series[1].value) +
                       "; a = 0.5 " + (rejected ? "rejected" : "ACCEPTED")};
  });

  criterion(9, "weighted tail", [&] {
    const TailReport t = weighted_tail_diagnostic(ensemble, {1000, 10000, 50000});
    const TailReport s = weighted_tail_diagnostic(saddle_ensemble, {1000, 10000, 50000});
    // The sum stops at the horizon, so the control runs far past the grid.
    const TailReport c = weighted_tail_diagnostic(constant_series(rate_cfg.schedule, 2000000, 1.0),
                                                  {1000, 10000, 50000});
    std::string series;
    for (const auto& pt : t.series) series += " " + fmt("%.4e", pt.value);
    std::string saddle;
    for (const auto& pt : s.series) saddle += " " + fmt("%.4e", pt.value);
    std::string control;
    for (const auto& pt : c.series) control += " " + fmt("%.4e", pt.value);
    return outcome{t.decreasing && s.decreasing && c.increasing,
                   "y^2+|z|" + series + (t.decreasing ? " decreasing" : " NOT decreasing") + "; saddle_abs" +
                       saddle + (s.decreasing ? " decreasing" : " NOT decreasing") + "; constant control" + control + (c.increasing ? " increasing" : " NOT increasing")};
  });

  criterion(10, "Robbins-Monro residuals", [&] {
    double worst_rebuild = 0.0, worst_rho = 0.0;
    bool tilde_ok = true;
    std::string details;
    const std::vector<std::pair<Vector, Vector>> cases = {
        {vec({-1.0}), vec({1.0})}, {vec({-1.0, 0.5}), vec({1.0, 2.0})}, {vec({0.5}), vec({1.0, 1.0})}};
    for (const auto& [a, b] : cases) {
      const Problem p = separable(a, b);
      const int d = p.f.dim();
      SGDConfig cfg = escape_config(p, 3000);
      cfg.x0 = Vector::Constant(d, 0.05);
      cfg.noise = NoiseModel::sphere_uniform(0.3);
      const Trajectory t = run_sgd(cfg, 4);
      const DecomposedTrajectory dec = decompose(t, p.manifold);
      const ResidualSeries r = robbins_monro_residuals(dec, manifold_drift(p.f, p.manifold, cfg.x_star, cfg.radius));
      const auto v = estimate_verdier_constant(p.f, p.manifold, p.critical_point, 0.1, 4000, 4);
      worst_rebuild = std::max(worst_rebuild, r.max_reconstruction_error);
      worst_rho = std::max(worst_rho, r.c_rho);
      tilde_ok = tilde_ok && r.c_rho_tilde <= v.estimate + 0.1;
      details += " " + fmt("%.3g", r.c_rho_tilde) + "<=" + fmt("%.3g", v.estimate) + "+0.1";
    }
    return outcome{worst_rebuild <= 1e-12 && worst_rho == 0.0 && tilde_ok,
                   "max rebuild error " + fmt("%.2e", worst_rebuild) + ", C_rho " + fmt("%g", worst_rho) +
                       ", C_rho_tilde vs Verdier:" + details};
  });

  criterion(11, "Lyapunov", [&] {
    const LyapunovCertificate hand = lyapunov_solve(mat(2, 2, {-1, 1, 0, -1}));
    const double hand_err = (hand.Q - mat(2, 2, {1.0, 0.5, 0.5, 1.5})).cwiseAbs().maxCoeff();
    rng_t rng = substream(77, 0);
    std::normal_distribution<double> nd(0.0, 1.0);
    double worst = 0.0;
    bool pd = true;
    for (int trial = 0; trial < 100; ++trial) {
      const int d = 1 + trial % 5;
      Matrix a(d, d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = nd(rng);
      const Eigen::VectorXcd ev = a.eigenvalues();
      double shift = 0.0;
      for (Eigen::Index i = 0; i < ev.size(); ++i) shift = std::max(shift, ev(i).real());
      const LyapunovCertificate c = lyapunov_solve(a - (shift + 0.1 + std::abs(nd(rng))) * Matrix::Identity(d, d));
      worst = std::max(worst, c.residual);
      pd = pd && c.lambda_min > 0.0;
    }
    return outcome{hand_err <= 1e-12 && worst <= 1e-10 && pd,
                   "hand case error " + fmt("%.1e", hand_err) + ", worst residual " + fmt("%.2e", worst) +
                       " over 100 matrices, " + (pd ? "all Q > 0" : "Q NOT positive definite")};
  });

  criterion(12, "center-stable toy", [&] {
    const ConstructedSystem s = build_system(mat(1, 1, {1.0}), mat(1, 1, {-1.0}), PolynomialMap(1, 1, {}), {});
    AbstractConfig c;
    c.schedule = StepSchedule(1.0, 1.0);
    c.e_noise = NoiseModel::sphere_uniform(1.0);
    c.horizon = 20000;
    c.tau_start = 10;
    c.L = 0.01;
    c.y0 = Vector::Zero(s.dim());
    const NonconvergenceStats omni = nonconvergence_experiment(s, c, 500, 500, 0.1);
    AbstractConfig r = c;
    r.e_noise = NoiseModel::subspace_restricted(NoiseModel::sphere_uniform(1.0), s.e_plus_basis());
    const NonconvergenceStats restricted = nonconvergence_experiment(s, r, 500, 500, 0.1);
    AbstractConfig longrun = c;
    longrun.horizon = 100000;
    longrun.escape_radius = 1e12;
    const AbstractRun run = simulate_abstract(s, longrun, 11);
    const PathwiseReport pw = pathwise_inequality_probe(run, s, c.L);
    const int conv_omni = static_cast<int>(std::lround(omni.p_converges * 500));
    const int conv_restricted = static_cast<int>(std::lround(restricted.p_converges * 500));
    const bool ok = conv_omni == 0 && conv_restricted == 500 && pw.steps_checked == 100000 &&
                    pw.lower_violations == 0 && pw.a_norm_violations == 0 && pw.standing_assumption_violations == 0;
    return outcome{ok, "omnidirectional " + std::to_string(conv_omni) + "/500 converge, restricted " +
                           std::to_string(conv_restricted) + "/500; pathwise " + std::to_string(pw.steps_checked) +
                           " steps, " + std::to_string(pw.lower_violations) + " lower and " +
                           std::to_string(pw.a_norm_violations) + " a_n violations"};
  });

  criterion(13, "APT demo", [&] {
    const double g = apt_gap(1.0, 99.0);
    const double expect = 1.0 + 1.0 / 100.0 - 1.0 / 101.0;
    const double far = apt_gap(1.0, 1e4);
    return outcome{std::abs(g - expect) <= 1e-9 && far >= 1.0 - 0.01,
                   "gap(1, 99) = " + format_number(g) + ", gap(1, 1e4) = " + format_number(far)};
  });

  criterion(14, "determinism", [&] {
    const fs::path root = fs::temp_directory_path() / "saddlelab_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg = root / "small.cfg";
    std::ofstream(cfg) << "schedule.c = 0.05\nschedule.alpha = 0.7\nsgd.x0 = 0,0.3\nsgd.horizon = 5000\n"
                          "sgd.radius = 0.5\nconditions.samples = 1000\ndrift.n_mc = 1000\n"
                          "rates.checkpoints = 100,5000\nrates.tail_grid = 100,1000\ncenterstable.horizon = 2000\n";
    const std::vector<std::string> cmds{"run", "mc", "conditions", "drift", "rates", "centerstable"};
    int files = 0, identical = 0;
    for (const auto& cmd : cmds) {
      std::vector<fs::path> dirs;
      for (const char* workers : {"1", "1", "4"}) {
        const fs::path d = root / (cmd + "_" + std::to_string(dirs.size()));
        std::ostringstream out, err;
        if (dispatch({cmd, "--config", cfg.string(), "--out", d.string(), "--runs", "12", "--workers", workers},
                     out, err) != 0)
          return outcome{false, cmd + " failed: " + err.str()};
        dirs.push_back(d);
      }
      for (const auto& entry : fs::directory_iterator(dirs[0])) {
        ++files;
        const std::string ref = slurp(entry.path());
        if (ref == slurp(dirs[1] / entry.path().filename()) && ref == slurp(dirs[2] / entry.path().filename()))
          ++identical;
      }
    }
    set_worker_count(1);
    fs::remove_all(root);
    return outcome{files > 0 && identical == files,
                   std::to_string(identical) + "/" + std::to_string(files) +
                       " output files byte-identical across reruns and 1 vs 4 workers"};
  });

  return failures;
}
