#include "saddlelab/app.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "saddlelab/conditions.hpp"
#include "saddlelab/dynamics.hpp"
#include "saddlelab/errors.hpp"
#include "saddlelab/geometry.hpp"

namespace saddlelab {

using json = nlohmann::ordered_json;

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix orthogonal_complement(const Matrix& basis, int d) {
  if (basis.cols() == 0) return Matrix::Identity(d, d);
  Eigen::HouseholderQR<Matrix> qr(basis);
  const Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  return q.rightCols(d - basis.cols());
}

selection_rule rule_from(const std::string& s) {
  if (s == "active_piece") return selection_rule::active_piece;
  if (s == "random_vertex") return selection_rule::random_vertex;
  return selection_rule::min_norm;
}

std::string csv_meta(const ExperimentConfig& cfg) {
  std::string s;
  s += std::string("# tool_version: ") + tool_version + "\n";
  s += "# config_hash: " + cfg.hash() + "\n";
  s += "# master_seed: " + std::to_string(cfg.integer("run.seed")) + "\n";
  return s;
}

json json_meta(const ExperimentConfig& cfg) {
  json j;
  j["tool_version"] = tool_version;
  j["config_hash"] = cfg.hash();
  j["master_seed"] = cfg.integer("run.seed");
  return j;
}

json number(double v) {
  // JSON has no inf / nan; those travel as strings.
  if (std::isfinite(v)) return v;
  return format_number(v);
}

void write_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw error("cannot write " + p.string());
  f << body;
  if (!f) throw error("failed writing " + p.string());
}

std::string columns(const std::string& prefix, Eigen::Index n) {
  std::string s;
  for (Eigen::Index i = 0; i < n; ++i) s += "," + prefix + std::to_string(i);
  return s;
}

void append_row(std::string& s, std::initializer_list<double> head, const Eigen::Ref<const Vector>& v,
                std::initializer_list<double> tail) {
  bool first = true;
  auto put = [&](double x) {
    if (!first) s += ',';
    first = false;
    s += format_number(x);
  };
  for (double x : head) put(x);
  for (Eigen::Index i = 0; i < v.size(); ++i) put(v(i));
  for (double x : tail) put(x);
  s += '\n';
}

// ---------------------------------------------------------------------------
// subcommands

void cmd_run(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream& out) {
  const SGDConfig sc = sgd_from(cfg);
  const auto seed = static_cast<std::uint64_t>(cfg.integer("run.seed"));
  const Trajectory t = run_sgd(sc, seed);
  const auto d = sc.x0.size();
  std::string s = csv_meta(cfg);
  s += "n,gamma" + columns("x_", d) + ",f,dist_M\n";
  for (Eigen::Index n = 0; n < t.x.cols(); ++n) {
    const double g = sc.schedule.gamma(n + 1);
    append_row(s, {static_cast<double>(n), g}, t.x.col(n),
               {t.f[static_cast<std::size_t>(n)], t.dist_m[static_cast<std::size_t>(n)]});
  }
  write_file(dir / "trajectory.csv", s);
  out << "wrote " << (dir / "trajectory.csv").string() << "\n";
}

void cmd_mc(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream& out) {
  const SGDConfig sc = sgd_from(cfg);
  const int runs = static_cast<int>(cfg.integer("run.runs"));
  const EscapeStats st = monte_carlo(sc, runs, execution::parallel);
  json j = json_meta(cfg);
  j["n_runs"] = st.n_runs;
  j["fraction_escaped"] = st.fraction_escaped;
  j["fraction_at_saddle"] = st.fraction_at_saddle;
  j["fraction_other"] = st.fraction_other;
  j["mean_final_f"] = number(st.mean_final_f);
  j["saddle_tolerance"] = st.saddle_tolerance;
  write_file(dir / "mc_summary.json", j.dump(2) + "\n");

  std::string s = csv_meta(cfg);
  s += "run,seed,outcome,final_f,final_distance,tail_mean_dist,exit_index,diverged\n";
  for (const auto& r : st.runs) {
    s += std::to_string(r.run) + "," + std::to_string(r.seed) + "," + to_string(r.outcome) + "," +
         format_number(r.final_f) + "," + format_number(r.final_distance) + "," +
         format_number(r.tail_mean_dist) + "," + (r.exit_index ? std::to_string(*r.exit_index) : "") + "," +
         (r.diverged ? "1" : "0") + "\n";
  }
  write_file(dir / "mc_runs.csv", s);
  out << "escaped " << format_number(st.fraction_escaped) << " at_saddle " << format_number(st.fraction_at_saddle)
      << "\n";
}

json report_json(const ConditionReport& r) {
  json j;
  j["estimate"] = number(r.estimate);
  j["outcome"] = to_string(r.outcome);
  j["n_samples"] = r.n_samples;
  j["radius"] = r.radius;
  j["seed"] = r.seed;
  json w = json::array();
  for (const auto& v : r.witness) {
    json p = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) p.push_back(number(v(i)));
    w.push_back(p);
  }
  j["witness"] = w;
  return j;
}

void cmd_conditions(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream& out) {
  const Problem p = problem_from(cfg);
  const auto seed = static_cast<std::uint64_t>(cfg.integer("run.seed"));
  const double r = cfg.real("conditions.radius");
  const int n = static_cast<int>(cfg.integer("conditions.samples"));
  const Vector& xs = p.critical_point;
  const auto d = xs.size();

  const ConditionReport sharp = estimate_sharpness(p.f, p.manifold, xs, r, n, seed);
  const ConditionReport angle = estimate_angle_beta(p.f, p.manifold, xs, r, n, seed);
  const ConditionReport verdier = estimate_verdier_constant(p.f, p.manifold, xs, r, n, seed);
  const box dom{xs.array() - r, xs.array() + r};
  const ConditionReport wc = estimate_weak_convexity_rho(p.f, dom, cfg.list("conditions.rho_grid"), n, seed);
  const classification cls = classify_critical_point(p.f, p.manifold, xs, r, cfg.real("conditions.tol"), n, seed);

  json j = json_meta(cfg);
  j["function"] = p.name;
  j["sharpness"] = report_json(sharp);
  j["angle"] = report_json(angle);
  j["verdier"] = report_json(verdier);
  j["weak_convexity"] = report_json(wc);
  j["classification"] = to_string(cls.kind);
  write_file(dir / "conditions.json", j.dump(2) + "\n");

  std::string s = csv_meta(cfg);
  s += "condition" + columns("x_", d) + columns("anchor_", d) + ",ratio\n";
  const Vector none = Vector::Constant(d, std::numeric_limits<double>::quiet_NaN());
  for (const auto* rep : {&sharp, &angle, &verdier}) {
    for (const auto& smp : rep->samples) {
      s += to_string(rep->kind) + ",";
      Vector row(2 * d);
      row << smp.x, (smp.anchor.size() == d ? smp.anchor : none);
      append_row(s, {}, row, {smp.ratio});
    }
  }
  write_file(dir / "condition_samples.csv", s);
  out << "classification " << to_string(cls.kind) << "\n";
}

void cmd_drift(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream& out) {
  const Problem p = problem_from(cfg);
  const NoiseModel noise = noise_from(cfg, p);
  const Vector& xs = p.critical_point;
  const int d = static_cast<int>(xs.size());
  const Matrix normals = orthogonal_complement(p.manifold.tangent_basis_at(p.manifold.project(xs)), d);
  std::vector<Vector> grid;
  for (double z : cfg.list("drift.z_norms"))
    for (Eigen::Index k = 0; k < normals.cols(); ++k)
      for (double sgn : {1.0, -1.0}) grid.push_back(xs + sgn * z * normals.col(k));
  drift_options opts;
  opts.beta = cfg.real("drift.beta");
  opts.user_c = cfg.real("drift.c");
  opts.n_mc = static_cast<int>(cfg.integer("drift.n_mc"));
  opts.seed = static_cast<std::uint64_t>(cfg.integer("run.seed"));
  opts.rule = rule_from(cfg.text("sgd.rule"));
  const DriftReport rep = drift_probe(p.f, p.manifold, grid, cfg.list("drift.gammas"), noise, opts);

  std::string s = csv_meta(cfg);
  s += columns("probe_x_", d).substr(1) + ",gamma,lhs,bound,fitted_C\n";
  for (const auto& pt : rep.probes) append_row(s, {}, pt.x, {pt.gamma, pt.lhs, pt.bound, pt.fitted_c});
  write_file(dir / "drift.csv", s);

  json j = json_meta(cfg);
  j["beta"] = rep.beta;
  j["user_c"] = rep.user_c;
  j["fitted_c"] = number(rep.fitted_c);
  j["violations"] = rep.violations;
  j["n_mc"] = rep.n_mc;
  j["largest_clean_radius"] = number(largest_clean_radius(rep));
  write_file(dir / "drift_summary.json", j.dump(2) + "\n");
  out << "fitted C " << format_number(rep.fitted_c) << " violations " << rep.violations << "\n";
}

void cmd_rates(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream& out) {
  const SGDConfig sc = sgd_from(cfg);
  const int runs = static_cast<int>(cfg.integer("run.runs"));
  std::vector<std::int64_t> checkpoints, grid;
  for (double v : cfg.list("rates.checkpoints")) checkpoints.push_back(static_cast<std::int64_t>(v));
  for (double v : cfg.list("rates.tail_grid")) grid.push_back(static_cast<std::int64_t>(v));
  const EnsembleSeries e = ensemble_z_series(sc, runs);
  const RateReport rate = rate_diagnostic(e, cfg.real("rates.a"), checkpoints);
  const TailReport tail = weighted_tail_diagnostic(e, grid);

  std::string s = csv_meta(cfg) + "n,mean_scaled_z2\n";
  for (const auto& pt : rate.series) s += std::to_string(pt.n) + "," + format_number(pt.value) + "\n";
  write_file(dir / "rates.csv", s);
  s = csv_meta(cfg) + "n,weighted_tail\n";
  for (const auto& pt : tail.series) s += std::to_string(pt.n) + "," + format_number(pt.value) + "\n";
  write_file(dir / "weighted_tail.csv", s);
  out << "rate decreasing " << rate.decreasing << " tail decreasing " << tail.decreasing << "\n";
}

void cmd_centerstable(const ExperimentConfig& cfg, const std::filesystem::path& dir, std::ostream& out) {
  const ConstructedSystem sys = system_from(cfg);
  const AbstractConfig ac = abstract_from(cfg, sys);
  const auto seed = static_cast<std::uint64_t>(cfg.integer("run.seed"));
  const AbstractRun run = simulate_abstract(sys, ac, seed);
  const PathwiseReport pw = pathwise_inequality_probe(run, sys, ac.L);
  const int runs = static_cast<int>(cfg.integer("run.runs"));
  const NonconvergenceStats st =
      nonconvergence_experiment(sys, ac, seed, runs, cfg.real("centerstable.epsilon"));

  std::string s = csv_meta(cfg);
  s += "n,gamma,chi,U" + columns("w_minus_", sys.d_minus()) + ",tau_flag\n";
  for (Eigen::Index k = 0; k < run.w.cols(); ++k) {
    const std::int64_t n = k + 1;
    const double flag = run.tau && n >= *run.tau ? 1.0 : 0.0;
    append_row(s, {static_cast<double>(n), ac.schedule.gamma(n), run.chi[static_cast<std::size_t>(n)],
                   run.U[static_cast<std::size_t>(n)]},
               run.w.col(k).tail(sys.d_minus()), {flag});
  }
  write_file(dir / "centerstable.csv", s);

  json j = json_meta(cfg);
  j["n_runs"] = st.n_runs;
  j["L"] = ac.L;
  j["tau_start"] = ac.tau_start;
  j["epsilon"] = st.epsilon;
  j["p_tau_finite"] = st.p_tau_finite;
  j["p_stays_above"] = st.p_stays_above;
  j["p_converges"] = st.p_converges;
  json pj;
  pj["seed"] = seed;
  pj["tau"] = run.tau ? json(*run.tau) : json(nullptr);
  pj["steps"] = pw.steps_checked;
  pj["lower_violations"] = pw.lower_violations;
  pj["a_norm_violations"] = pw.a_norm_violations;
  pj["max_a_norm"] = pw.max_a_norm;
  pj["a_norm_bound"] = pw.a_norm_bound;
  pj["below_threshold_steps"] = pw.below_threshold_steps;
  pj["fitted_c"] = number(pw.fitted_c);
  pj["standing_assumption_violations"] = pw.standing_assumption_violations;
  pj["max_identity_error"] = run.max_identity_error;
  j["pathwise"] = pj;
  j["contract_flags"] = run.contract_flags;
  write_file(dir / "centerstable.json", j.dump(2) + "\n");
  out << "P(tau finite) " << format_number(st.p_tau_finite) << " P(converges) " << format_number(st.p_converges)
      << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// builders

Problem problem_from(const ExperimentConfig& cfg) {
  builtin_params params;
  params.a = to_vector(cfg.list("problem.a"));
  params.b = to_vector(cfg.list("problem.b"));
  Problem p = builtin(cfg.text("problem.function"), params);
  const int d = p.f.dim();
  const auto xs = cfg.list("problem.x_star");
  if (!xs.empty()) p.critical_point = to_vector(xs);
  const std::string m = cfg.text("problem.manifold");
  if (m == "whole_space") p.manifold = Manifold::whole_space(d);
  if (m == "point") p.manifold = Manifold::point(p.critical_point);
  if (m == "coordinate") p.manifold = Manifold::coordinate(d, static_cast<int>(cfg.integer("problem.manifold_dim")));
  return p;
}

Matrix unstable_directions(const Problem& p) {
  const int d = p.f.dim();
  const Manifold& m = p.manifold;
  if (m.dim() == 0) return Matrix(d, 0);
  const Vector y = m.project(p.critical_point);
  const Matrix h = riem_hessian(smooth_representative_gradient(p.f), m, y);
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const Matrix basis = m.tangent_basis_at(y);
  std::vector<Eigen::Index> neg;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) < -1e-8) neg.push_back(i);
  Matrix out(d, static_cast<Eigen::Index>(neg.size()));
  for (std::size_t k = 0; k < neg.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = basis * es.eigenvectors().col(neg[k]);
  return out;
}

NoiseModel noise_from(const ExperimentConfig& cfg, const Problem& p) {
  const std::string kind = cfg.text("noise.kind");
  const double sigma = cfg.real("noise.sigma");
  NoiseModel base = NoiseModel::zero();
  if (kind == "sphere_uniform") base = NoiseModel::sphere_uniform(sigma);
  if (kind == "trunc_gaussian") base = NoiseModel::trunc_gaussian(sigma, cfg.real("noise.bound"));
  if (kind == "rademacher") base = NoiseModel::rademacher(sigma);
  const std::string restrict = cfg.text("noise.restrict");
  if (restrict == "none") return base;
  const Matrix unstable = unstable_directions(p);
  const Matrix span = restrict == "unstable" ? unstable : orthogonal_complement(unstable, p.f.dim());
  if (span.cols() == 0) throw precondition_error("noise.restrict leaves no directions to draw from");
  return NoiseModel::subspace_restricted(base, span);
}

SGDConfig sgd_from(const ExperimentConfig& cfg) {
  const Problem p = problem_from(cfg);
  SGDConfig sc;
  sc.f = p.f;
  sc.manifold = p.manifold;
  sc.x_star = p.critical_point;
  const auto x0 = cfg.list("sgd.x0");
  sc.x0 = x0.empty() ? p.critical_point : to_vector(x0);
  sc.schedule = StepSchedule(cfg.real("schedule.c"), cfg.real("schedule.alpha"));
  sc.noise = noise_from(cfg, p);
  sc.rule = rule_from(cfg.text("sgd.rule"));
  sc.horizon = cfg.integer("sgd.horizon");
  sc.radius = cfg.real("sgd.radius");
  sc.master_seed = static_cast<std::uint64_t>(cfg.integer("run.seed"));
  sc.saddle_tolerance = cfg.real("sgd.saddle_tolerance");
  sc.validate();
  return sc;
}

ConstructedSystem system_from(const ExperimentConfig& cfg) {
  const Vector jp = to_vector(cfg.list("centerstable.j_plus"));
  const Vector jm = to_vector(cfg.list("centerstable.j_minus"));
  const auto dp = static_cast<int>(jp.size());
  const auto dm = static_cast<int>(jm.size());
  std::vector<monomial> terms;
  const double gq = cfg.real("centerstable.g_quadratic");
  if (gq != 0.0)
    for (int i = 0; i < dm; ++i) {
      std::vector<int> e(static_cast<std::size_t>(dp), 0);
      e[0] = 2;
      terms.push_back({i, gq, e});
    }
  DeltaSpec delta{cfg.real("centerstable.delta_gain"), cfg.real("centerstable.delta_saturation")};
  return build_system(jp.asDiagonal().toDenseMatrix(), jm.asDiagonal().toDenseMatrix(),
                      PolynomialMap(dp, dm, std::move(terms)), delta);
}

AbstractConfig abstract_from(const ExperimentConfig& cfg, const ConstructedSystem& sys) {
  AbstractConfig ac;
  ac.schedule = StepSchedule(cfg.real("schedule.c"), cfg.real("schedule.alpha"));
  const NoiseModel sphere = NoiseModel::sphere_uniform(cfg.real("centerstable.sigma"));
  ac.e_noise = cfg.text("centerstable.noise") == "restricted"
                   ? NoiseModel::subspace_restricted(sphere, sys.e_plus_basis())
                   : sphere;
  ac.rho = {NoiseModel::rademacher(1.0), cfg.real("centerstable.rho_scale"), 1.0};
  ac.rho_tilde = {NoiseModel::rademacher(1.0), cfg.real("centerstable.rho_tilde_scale"), 0.75};
  ac.horizon = cfg.integer("centerstable.horizon");
  ac.tau_start = cfg.integer("centerstable.tau_start");
  ac.L = cfg.real("centerstable.L");
  const auto y0 = cfg.list("centerstable.y0");
  ac.y0 = y0.empty() ? Vector::Zero(sys.dim()) : to_vector(y0);
  ac.escape_radius = cfg.real("centerstable.escape_radius");
  return ac;
}

// ---------------------------------------------------------------------------
// dispatch

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic subgradient experiments near nonsmooth saddles", "saddlelab"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::int64_t> seed, runs;
  std::optional<std::string> out_dir;
  int workers = 0;
  double apt_T = 1.0, apt_t = 99.0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key = value settings file");
    sub->add_option("--seed", seed, "master seed (overrides run.seed)");
    sub->add_option("--runs", runs, "number of runs (overrides run.runs)");
    sub->add_option("--out", out_dir, "output directory (overrides run.out)");
    sub->add_option("--workers", workers, "OpenMP worker count");
  };
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"run", "one trajectory to trajectory.csv"},
      {"mc", "Monte Carlo escape statistics"},
      {"conditions", "certify sharpness, angle, Verdier, weak convexity"},
      {"drift", "one-step drift inequality probe"},
      {"rates", "ensemble rate and weighted tail diagnostics"},
      {"centerstable", "abstract recursion and nonconvergence experiment"},
      {"apt", "asymptotic pseudotrajectory gap"}};
  std::map<std::string, CLI::App*> handles;
  for (const auto& [name, help] : subs) {
    CLI::App* sub = app.add_subcommand(name, help);
    common(sub);
    handles[name] = sub;
  }
  handles["apt"]->add_option("--T", apt_T, "window length");
  handles["apt"]->add_option("--t", apt_t, "shift");

  std::vector<std::string> argv_store{"saddlelab"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_validation;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream f(config_path, std::ios::binary);
      if (!f) {
        err << "cannot read " << config_path << "\n";
        return exit_validation;
      }
      std::stringstream buf;
      buf << f.rdbuf();
      cfg = ExperimentConfig::parse(buf.str());
    }
    if (seed) cfg.set("run.seed", std::to_string(*seed));
    if (runs) cfg.set("run.runs", std::to_string(*runs));
    if (workers > 0) set_worker_count(workers);

    const CLI::App* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    if (name == "apt") {
      if (!(apt_T > 0.0) || !(apt_t >= 0.0)) {
        err << "RangeError apt: need T > 0 and t >= 0\n";
        return exit_validation;
      }
      out << format_number(apt_gap(apt_T, apt_t, static_cast<int>(cfg.integer("apt.grid")))) << "\n";
      return exit_ok;
    }
    const std::filesystem::path dir = out_dir ? *out_dir : cfg.text("run.out");
    std::filesystem::create_directories(dir);
    if (name == "run") cmd_run(cfg, dir, out);
    if (name == "mc") cmd_mc(cfg, dir, out);
    if (name == "conditions") cmd_conditions(cfg, dir, out);
    if (name == "drift") cmd_drift(cfg, dir, out);
    if (name == "rates") cmd_rates(cfg, dir, out);
    if (name == "centerstable") cmd_centerstable(cfg, dir, out);
    return exit_ok;
  } catch (const config_error& e) {
    err << e.what() << "\n";
    return exit_validation;
  } catch (const precondition_error& e) {
    err << "invalid input: " << e.what() << "\n";
    return exit_validation;
  } catch (const invalid_exponent& e) {
    err << "invalid input: " << e.what() << "\n";
    return exit_validation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_runtime;
  }
}

}  // namespace saddlelab
