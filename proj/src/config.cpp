#include "saddlelab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "saddlelab/functions.hpp"

namespace saddlelab {

namespace {

enum class value_type { real, integer, text, real_list, choice };

struct key_spec {
  std::string key;
  std::string fallback;
  value_type type;
  std::vector<std::string> choices;
  // Returns an empty string when the (already typed) value is acceptable.
  std::function<std::string(const std::string&)> range;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_real(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, t.data() + t.size(), out);
  return res.ec == std::errc() && res.ptr == t.data() + t.size();
}

bool parse_integer(const std::string& s, std::int64_t& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  return res.ec == std::errc() && res.ptr == t.data() + t.size();
}

bool parse_list(const std::string& s, std::vector<double>& out) {
  out.clear();
  if (trim(s).empty()) return true;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    if (!parse_real(item, v)) return false;
    out.push_back(v);
  }
  return !s.empty() && s.back() != ',';
}

std::function<std::string(const std::string&)> real_check(std::function<bool(double)> ok, std::string what) {
  return [ok = std::move(ok), what = std::move(what)](const std::string& raw) -> std::string {
    double v = 0.0;
    parse_real(raw, v);
    return ok(v) ? "" : what;
  };
}

std::function<std::string(const std::string&)> int_at_least(std::int64_t lo) {
  return [lo](const std::string& raw) -> std::string {
    std::int64_t v = 0;
    parse_integer(raw, v);
    return v >= lo ? "" : "must be at least " + std::to_string(lo);
  };
}

std::function<std::string(const std::string&)> list_check(std::function<bool(double)> ok, std::string what) {
  return [ok = std::move(ok), what = std::move(what)](const std::string& raw) -> std::string {
    std::vector<double> v;
    parse_list(raw, v);
    for (double x : v)
      if (!ok(x)) return what;
    return "";
  };
}

const std::vector<key_spec>& schema() {
  static const std::vector<key_spec> s = [] {
    auto positive = [](double v) { return v > 0.0; };
    auto nonneg = [](double v) { return v >= 0.0; };
    std::vector<key_spec> k;
    k.push_back({"problem.function", "saddle_abs", value_type::choice, catalog_names(), {}});
    k.push_back({"problem.a", "", value_type::real_list, {}, {}});
    k.push_back({"problem.b", "", value_type::real_list, {}, list_check(positive, "weights must be positive")});
    k.push_back({"problem.manifold", "builtin", value_type::choice, {"builtin", "whole_space", "point", "coordinate"}, {}});
    k.push_back({"problem.manifold_dim", "1", value_type::integer, {}, int_at_least(0)});
    k.push_back({"problem.x_star", "", value_type::real_list, {}, {}});
    k.push_back({"schedule.c", "1", value_type::real, {}, real_check(positive, "must be positive")});
    k.push_back({"schedule.alpha", "1", value_type::real, {},
                 real_check([](double a) { return a > 0.5 && a <= 1.0; },
                            "must lie in (0.5, 1] so the steps sum to infinity while their squares stay summable")});
    k.push_back({"noise.kind", "sphere_uniform", value_type::choice,
                 {"zero", "sphere_uniform", "trunc_gaussian", "rademacher"}, {}});
    k.push_back({"noise.sigma", "0.5", value_type::real, {}, real_check(nonneg, "must be non-negative")});
    k.push_back({"noise.bound", "1", value_type::real, {}, real_check(positive, "must be positive")});
    k.push_back({"noise.restrict", "none", value_type::choice, {"none", "off_unstable", "unstable"}, {}});
    k.push_back({"sgd.x0", "", value_type::real_list, {}, {}});
    k.push_back({"sgd.rule", "min_norm", value_type::choice, {"min_norm", "active_piece", "random_vertex"}, {}});
    k.push_back({"sgd.horizon", "1000", value_type::integer, {}, int_at_least(1)});
    k.push_back({"sgd.radius", "1", value_type::real, {}, real_check(positive, "must be positive")});
    k.push_back({"sgd.saddle_tolerance", "0", value_type::real, {}, real_check(nonneg, "must be non-negative")});
    k.push_back({"run.seed", "0", value_type::integer, {}, int_at_least(0)});
    k.push_back({"run.runs", "100", value_type::integer, {}, int_at_least(1)});
    k.push_back({"run.out", ".", value_type::text, {}, {}});
    k.push_back({"conditions.radius", "0.1", value_type::real, {}, real_check(positive, "must be positive")});
    k.push_back({"conditions.samples", "4000", value_type::integer, {}, int_at_least(1)});
    k.push_back({"conditions.tol", "1e-6", value_type::real, {}, real_check(positive, "must be positive")});
    k.push_back({"conditions.rho_grid", "0.5,1,2", value_type::real_list, {},
                 list_check(positive, "grid values must be positive")});
    k.push_back({"drift.beta", "1", value_type::real, {}, real_check(positive, "must be positive")});
    k.push_back({"drift.c", "0", value_type::real, {}, real_check(nonneg, "must be non-negative")});
    k.push_back({"drift.n_mc", "10000", value_type::integer, {}, int_at_least(1)});
    k.push_back({"drift.z_norms", "0.01,0.0325,0.055,0.0775,0.1", value_type::real_list, {},
                 list_check(positive, "norms must be positive")});
    k.push_back({"drift.gammas", "0.01,0.001", value_type::real_list, {},
                 list_check(positive, "step sizes must be positive")});
    k.push_back({"rates.a", "0.2", value_type::real, {}, {}});
    k.push_back({"rates.checkpoints", "1000,100000", value_type::real_list, {},
                 list_check([](double v) { return v >= 1.0 && v == std::floor(v); }, "checkpoints must be positive integers")});
    k.push_back({"rates.tail_grid", "1000,10000,50000", value_type::real_list, {},
                 list_check([](double v) { return v >= 1.0 && v == std::floor(v); }, "grid values must be positive integers")});
    k.push_back({"centerstable.j_plus", "1", value_type::real_list, {},
                 list_check(nonneg, "stable block entries must be non-negative")});
    k.push_back({"centerstable.j_minus", "-1", value_type::real_list, {},
                 list_check([](double v) { return v < 0.0; }, "unstable block entries must be negative")});
    k.push_back({"centerstable.g_quadratic", "0", value_type::real, {}, {}});
    k.push_back({"centerstable.delta_gain", "0", value_type::real, {}, real_check(nonneg, "must be non-negative")});
    k.push_back({"centerstable.delta_saturation", "inf", value_type::real, {}, real_check(nonneg, "must be non-negative")});
    k.push_back({"centerstable.noise", "omnidirectional", value_type::choice, {"omnidirectional", "restricted"}, {}});
    k.push_back({"centerstable.sigma", "1", value_type::real, {}, real_check(positive, "must be positive")});
    k.push_back({"centerstable.L", "0.01", value_type::real, {}, real_check(positive, "must be positive")});
    k.push_back({"centerstable.tau_start", "10", value_type::integer, {}, int_at_least(1)});
    k.push_back({"centerstable.horizon", "20000", value_type::integer, {}, int_at_least(1)});
    k.push_back({"centerstable.epsilon", "0.1", value_type::real, {}, real_check(positive, "must be positive")});
    k.push_back({"centerstable.y0", "", value_type::real_list, {}, {}});
    k.push_back({"centerstable.rho_scale", "0", value_type::real, {}, real_check(nonneg, "must be non-negative")});
    k.push_back({"centerstable.rho_tilde_scale", "0", value_type::real, {}, real_check(nonneg, "must be non-negative")});
    k.push_back({"centerstable.escape_radius", "1e6", value_type::real, {}, real_check(positive, "must be positive")});
    k.push_back({"apt.T", "1", value_type::real, {}, real_check(positive, "must be positive")});
    k.push_back({"apt.t", "99", value_type::real, {}, real_check(nonneg, "must be non-negative")});
    k.push_back({"apt.grid", "10001", value_type::integer, {}, int_at_least(2)});
    return k;
  }();
  return s;
}

const key_spec* find_spec(const std::string& key) {
  for (const auto& s : schema())
    if (s.key == key) return &s;
  return nullptr;
}

// Type and range of a single value; empty on success.
std::vector<config_issue> check_value(const key_spec& spec, const std::string& raw, int line) {
  std::vector<config_issue> out;
  bool typed = true;
  switch (spec.type) {
    case value_type::real: {
      double v = 0.0;
      typed = parse_real(raw, v);
      if (!typed) out.push_back({issue_kind::type_error, spec.key, line, "expected a number, got '" + raw + "'"});
      break;
    }
    case value_type::integer: {
      std::int64_t v = 0;
      typed = parse_integer(raw, v);
      if (!typed) out.push_back({issue_kind::type_error, spec.key, line, "expected an integer, got '" + raw + "'"});
      break;
    }
    case value_type::real_list: {
      std::vector<double> v;
      typed = parse_list(raw, v);
      if (!typed) out.push_back({issue_kind::type_error, spec.key, line, "expected a comma list of numbers, got '" + raw + "'"});
      break;
    }
    case value_type::choice:
      if (std::find(spec.choices.begin(), spec.choices.end(), raw) == spec.choices.end()) {
        std::string all;
        for (const auto& c : spec.choices) all += (all.empty() ? "" : ", ") + c;
        out.push_back({issue_kind::range_error, spec.key, line, "'" + raw + "' is not one of: " + all});
      }
      typed = false;
      break;
    case value_type::text:
      break;
  }
  if (typed && spec.range) {
    const std::string why = spec.range(raw);
    if (!why.empty()) out.push_back({issue_kind::range_error, spec.key, line, spec.key + " = " + raw + ": " + why});
  }
  return out;
}

std::string summarize(const std::vector<config_issue>& issues) {
  std::string s = "invalid configuration:";
  for (const auto& i : issues) {
    s += "\n  " + to_string(i.kind) + " " + i.key;
    if (i.line > 0) s += " (line " + std::to_string(i.line) + ")";
    s += ": " + i.message;
  }
  return s;
}

}  // namespace

std::string to_string(issue_kind k) {
  switch (k) {
    case issue_kind::unknown_key: return "UnknownKey";
    case issue_kind::type_error: return "TypeError";
    case issue_kind::range_error: return "RangeError";
  }
  return "?";
}

config_error::config_error(std::vector<config_issue> issues)
    : error(summarize(issues)), issues_(std::move(issues)) {}

const std::vector<std::pair<std::string, std::string>>& config_defaults() {
  static const std::vector<std::pair<std::string, std::string>> d = [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : schema()) out.emplace_back(s.key, s.fallback);
    return out;
  }();
  return d;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::vector<config_issue> issues;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      issues.push_back({issue_kind::type_error, t, lineno, "expected 'section.key = value'"});
      continue;
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const key_spec* spec = find_spec(key);
    if (!spec) {
      issues.push_back({issue_kind::unknown_key, key, lineno, "no such setting"});
      continue;
    }
    if (seen.count(key)) {
      issues.push_back({issue_kind::type_error, key, lineno,
                        "given twice (first on line " + std::to_string(seen[key]) + ")"});
      continue;
    }
    seen[key] = lineno;
    auto bad = check_value(*spec, value, lineno);
    issues.insert(issues.end(), bad.begin(), bad.end());
    cfg.entries_.emplace_back(key, value);
  }
  if (issues.empty()) {
    auto cross = cfg.validate();
    issues.insert(issues.end(), cross.begin(), cross.end());
  }
  if (!issues.empty()) throw config_error(std::move(issues));
  return cfg;
}

void ExperimentConfig::set(const std::string& key, const std::string& raw_value) {
  const key_spec* spec = find_spec(key);
  if (!spec) throw config_error({{issue_kind::unknown_key, key, 0, "no such setting"}});
  const std::string value = trim(raw_value);
  auto bad = check_value(*spec, value, 0);
  if (!bad.empty()) throw config_error(std::move(bad));
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
  if (it != entries_.end())
    it->second = value;
  else
    entries_.emplace_back(key, value);
  auto cross = validate();
  if (!cross.empty()) throw config_error(std::move(cross));
}

bool ExperimentConfig::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

const std::string& ExperimentConfig::raw(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.first == key) return e.second;
  const key_spec* spec = find_spec(key);
  if (!spec) throw config_error({{issue_kind::unknown_key, key, 0, "no such setting"}});
  return spec->fallback;
}

double ExperimentConfig::real(const std::string& key) const {
  double v = 0.0;
  if (!parse_real(raw(key), v)) throw config_error({{issue_kind::type_error, key, 0, "not a number"}});
  return v;
}

std::int64_t ExperimentConfig::integer(const std::string& key) const {
  std::int64_t v = 0;
  if (!parse_integer(raw(key), v)) throw config_error({{issue_kind::type_error, key, 0, "not an integer"}});
  return v;
}

const std::string& ExperimentConfig::text(const std::string& key) const { return raw(key); }

std::vector<double> ExperimentConfig::list(const std::string& key) const {
  std::vector<double> v;
  if (!parse_list(raw(key), v)) throw config_error({{issue_kind::type_error, key, 0, "not a number list"}});
  return v;
}

std::vector<config_issue> ExperimentConfig::validate() const {
  std::vector<config_issue> out;
  const std::string fn = text("problem.function");
  const bool sep = fn == "separable";
  const std::size_t na = list("problem.a").size();
  const std::size_t nb = list("problem.b").size();
  if (sep && nb == 0)
    out.push_back({issue_kind::range_error, "problem.b", 0, "separable needs at least one absolute-value weight"});
  if (!sep && (na > 0 || nb > 0))
    out.push_back({issue_kind::range_error, "problem.a", 0, "coefficients only apply to the separable family"});
  const std::size_t dim = sep ? na + nb : 2;
  for (const char* key : {"problem.x_star", "sgd.x0"}) {
    const std::size_t n = list(key).size();
    if (n != 0 && n != dim)
      out.push_back({issue_kind::range_error, key, 0,
                     "has " + std::to_string(n) + " entries, the function lives in dimension " + std::to_string(dim)});
  }
  if (text("problem.manifold") == "coordinate" && static_cast<std::size_t>(integer("problem.manifold_dim")) > dim)
    out.push_back({issue_kind::range_error, "problem.manifold_dim", 0, "exceeds the ambient dimension"});
  if (list("centerstable.j_minus").empty())
    out.push_back({issue_kind::range_error, "centerstable.j_minus", 0, "needs at least one unstable direction"});
  const std::size_t cs_dim = list("centerstable.j_plus").size() + list("centerstable.j_minus").size();
  const std::size_t ny = list("centerstable.y0").size();
  if (ny != 0 && ny != cs_dim)
    out.push_back({issue_kind::range_error, "centerstable.y0", 0,
                   "has " + std::to_string(ny) + " entries, the system lives in dimension " + std::to_string(cs_dim)});
  if (text("centerstable.noise") == "restricted" && list("centerstable.j_plus").empty())
    out.push_back({issue_kind::range_error, "centerstable.noise", 0, "restricted noise needs a stable block"});
  if (real("centerstable.g_quadratic") != 0.0 && list("centerstable.j_plus").empty())
    out.push_back({issue_kind::range_error, "centerstable.g_quadratic", 0, "the manifold graph needs a stable block"});
  return out;
}

std::string ExperimentConfig::to_text() const {
  std::string s;
  for (const auto& [k, v] : entries_) s += k + " = " + v + "\n";
  return s;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_text())));
  return buf;
}

}  // namespace saddlelab
