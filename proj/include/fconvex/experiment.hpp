#pragma once

/**
 * @file experiment.hpp
 * @brief Experiment configuration: transform and datum specs, the flat
 * key=value config format, and the resolved settings used by the CLI.
 *
 * Config files hold `key = value` lines, `#` comments and optional
 * `[section]` headers that prefix the keys below them. Values that start
 * with `[` are JSON arrays.
 */

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fconvex/certify.hpp"
#include "fconvex/criteria.hpp"
#include "fconvex/ftransform.hpp"
#include "fconvex/grid.hpp"
#include "fconvex/gtransform.hpp"
#include "fconvex/heatflow.hpp"
#include "fconvex/hot.hpp"
#include "json.hpp"

namespace fconvex {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// JSON with bare inf/-inf accepted as numbers.
inline nlohmann::json parse_json(const std::string& text) {
  static const std::regex bare_inf(R"((^|[\[,\s])(-?)inf\b)");
  const std::string fixed = std::regex_replace(text, bare_inf, "$1\"$2inf\"");
  try {
    return nlohmann::json::parse(fixed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse '" + text + "': " + e.what());
  }
}

inline double json_number(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw ConfigError("expected a number, got " + j.dump());
}

/// name(arg, ...) with JSON arguments; a bare name has no arguments.
struct Call {
  std::string name;
  nlohmann::json args = nlohmann::json::array();

  [[nodiscard]] double num(std::size_t i) const {
    if (i >= args.size()) throw ConfigError(name + ": missing argument " + std::to_string(i + 1));
    return json_number(args[i]);
  }
  [[nodiscard]] double num(std::size_t i, double fallback) const {
    return i < args.size() ? json_number(args[i]) : fallback;
  }
};

inline Call parse_call(const std::string& text) {
  const std::string s = trim(text);
  Call c;
  const auto open = s.find('(');
  if (open == std::string::npos) {
    c.name = s;
  } else {
    if (s.back() != ')') throw ConfigError("unbalanced parentheses in '" + s + "'");
    c.name = trim(s.substr(0, open));
    const std::string inner = trim(s.substr(open + 1, s.size() - open - 2));
    if (!inner.empty()) c.args = parse_json("[" + inner + "]");
  }
  if (c.name.empty()) throw ConfigError("empty name in '" + s + "'");
  return c;
}

}  // namespace detail

/**
 * Transform from a spec string: power(alpha), log, affine(A, B), exp,
 * hot(a), neglog(a, ell), remark, from_g(points, left_slope, right_slope).
 */
inline FTransform parse_transform(const std::string& spec) {
  const auto c = detail::parse_call(spec);
  try {
    if (c.name == "power") return make_power_alpha(c.num(0));
    if (c.name == "log") return make_log();
    if (c.name == "affine") return make_affine(c.num(0), c.num(1, 0.0));
    if (c.name == "exp") return make_exponential();
    if (c.name == "hot") return make_hot(c.num(0, 1.0));
    if (c.name == "neglog") return make_neglog(c.num(0, 0.0), c.num(1, 1.0));
    if (c.name == "remark") return make_from_g(remark_generator(), 0.0, 0.0, 1.0);
    if (c.name == "from_g") {
      if (c.args.empty() || !c.args[0].is_array()) throw ConfigError("from_g: first argument is a list of [z, g] pairs");
      std::vector<std::pair<double, double>> pts;
      for (const auto& p : c.args[0]) {
        if (!p.is_array() || p.size() != 2) throw ConfigError("from_g: breakpoints are [z, g] pairs");
        pts.emplace_back(detail::json_number(p[0]), detail::json_number(p[1]));
      }
      std::optional<double> left, right;
      if (c.args.size() > 1) left = c.num(1);
      if (c.args.size() > 2) right = c.num(2);
      return make_from_g(GSpec(std::move(pts), left, right), 0.0, 0.0, 1.0);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("transform '" + spec + "': " + e.what());
  }
  throw ConfigError("unknown transform '" + c.name + "'");
}

/// Flat key=value settings with section prefixes.
class ConfigMap {
 public:
  static ConfigMap parse(std::istream& is) {
    ConfigMap cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
        section = detail::trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
      std::string key = detail::trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      if (!section.empty()) key = section + "." + key;
      cfg.set(key, detail::trim(line.substr(eq + 1)));
    }
    return cfg;
  }

  static ConfigMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    return parse(in);
  }

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  [[nodiscard]] bool has(const std::string& key) const { return kv_.count(key) > 0; }
  [[nodiscard]] const std::map<std::string, std::string>& entries() const { return kv_; }

  [[nodiscard]] std::string str(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  [[nodiscard]] double num(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    return to_number(key, it->second);
  }

  /// JSON array or a single scalar.
  [[nodiscard]] std::vector<double> nums(const std::string& key, std::vector<double> fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    return to_numbers(key, it->second);
  }

  [[nodiscard]] std::vector<std::string> strs(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return {};
    const std::string& v = it->second;
    if (v.empty() || v.front() != '[') return {v};
    const auto j = detail::parse_json(v);
    std::vector<std::string> out;
    for (const auto& e : j) {
      if (!e.is_string()) throw ConfigError(key + ": expected a list of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  static double to_number(const std::string& key, const std::string& v) {
    if (v == "inf") return kInf;
    if (v == "-inf") return -kInf;
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing text");
      return d;
    } catch (const std::exception&) {
      throw ConfigError(key + ": '" + v + "' is not a number");
    }
  }

  static std::vector<double> to_numbers(const std::string& key, const std::string& v) {
    if (!v.empty() && v.front() == '[') {
      const auto j = detail::parse_json(v);
      if (!j.is_array()) throw ConfigError(key + ": expected an array");
      std::vector<double> out;
      for (const auto& e : j) out.push_back(detail::json_number(e));
      return out;
    }
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_number(key, detail::trim(item)));
    return out;
  }

 private:
  std::map<std::string, std::string> kv_;
};

/// Everything a run needs, with defaults filled in.
struct ExperimentConfig {
  std::vector<std::string> transform_specs;
  std::vector<FTransform> transforms;
  DomainSpec domain = DomainSpec::free_space(1);
  std::string datum_spec = "abs";
  std::optional<double> datum_growth_A;
  std::vector<double> times{0.1};
  double grid_h = 1.0 / 64.0;
  Interval grid_extent{-4.0, 4.0};
  FlowOptions flow;
  SamplingPlan plan;
  int refine_levels = 2;
  Interval hunt_window{-4.0, 4.0};
  std::string out_dir = "fconvex_out";

  /// Resolved settings as key=value pairs, recorded in every output.
  [[nodiscard]] std::map<std::string, std::string> describe() const {
    std::map<std::string, std::string> m;
    std::string ts;
    for (std::size_t i = 0; i < transform_specs.size(); ++i) ts += (i ? ";" : "") + transform_specs[i];
    m["transforms"] = ts;
    m["domain.kind"] = to_string(domain.kind);
    m["domain.dim"] = std::to_string(domain.n);
    if (domain.kind != DomainSpec::Kind::free_space) {
      m["domain.lo"] = detail::fmt(domain.xb.lo);
      m["domain.hi"] = detail::fmt(domain.xb.hi);
      m["domain.ell"] = detail::fmt(domain.ell);
      if (domain.kind == DomainSpec::Kind::rectangle) {
        m["domain.ylo"] = detail::fmt(domain.yb.lo);
        m["domain.yhi"] = detail::fmt(domain.yb.hi);
      }
    }
    m["datum"] = datum_spec;
    if (datum_growth_A) m["datum.growth_A"] = detail::fmt(*datum_growth_A);
    std::string tl;
    for (std::size_t i = 0; i < times.size(); ++i) tl += (i ? "," : "") + detail::fmt(times[i]);
    m["times"] = tl;
    m["grid.h"] = detail::fmt(grid_h);
    m["grid.lo"] = detail::fmt(grid_extent.lo);
    m["grid.hi"] = detail::fmt(grid_extent.hi);
    m["flow.eps_tail"] = detail::fmt(flow.eps_tail);
    m["flow.margin"] = detail::fmt(flow.margin);
    std::string ls;
    for (std::size_t i = 0; i < plan.lambdas.size(); ++i) ls += (i ? "," : "") + detail::fmt(plan.lambdas[i]);
    m["certify.lambda_set"] = ls;
    m["certify.plan"] = plan.kind == SamplingPlan::Kind::random ? "random" : "grid";
    m["certify.samples"] = std::to_string(plan.samples);
    m["certify.significance_factor"] = detail::fmt(plan.significance_factor);
    m["certify.refine_levels"] = std::to_string(refine_levels);
    m["seed"] = std::to_string(plan.seed);
    m["hunt.window"] = "[" + detail::fmt(hunt_window.lo) + "," + detail::fmt(hunt_window.hi) + "]";
    return m;
  }
};

namespace detail {

inline Interval parse_extent(const std::string& key, const std::string& v) {
  const auto xs = ConfigMap::to_numbers(key, v);
  if (xs.size() == 1) {
    if (!(xs[0] > 0.0)) throw ConfigError(key + ": half-width must be positive");
    return {-xs[0], xs[0]};
  }
  if (xs.size() != 2 || !(xs[1] > xs[0])) throw ConfigError(key + ": expected [lo, hi] with lo < hi");
  return {xs[0], xs[1]};
}

}  // namespace detail

inline ExperimentConfig resolve_config(const ConfigMap& cfg) {
  ExperimentConfig ec;
  ec.transform_specs = cfg.strs("transforms");
  for (const auto& s : cfg.strs("transform")) ec.transform_specs.push_back(s);
  for (const auto& s : ec.transform_specs) ec.transforms.push_back(parse_transform(s));

  const std::string kind = cfg.str("domain.kind", "free_space");
  const int dim = static_cast<int>(cfg.num("domain.dim", 1));
  if (dim != 1 && dim != 2) throw ConfigError("domain.dim must be 1 or 2");
  const double ell = cfg.num("domain.ell", 0.0);
  if (kind == "free_space") {
    ec.domain = DomainSpec::free_space(dim);
  } else if (kind == "half_line") {
    ec.domain = DomainSpec::half_line(cfg.num("domain.lo", 0.0), ell);
  } else if (kind == "interval") {
    ec.domain = DomainSpec::interval(cfg.num("domain.lo", 0.0), cfg.num("domain.hi", 1.0), ell);
  } else if (kind == "rectangle") {
    ec.domain = DomainSpec::rectangle({cfg.num("domain.lo", 0.0), cfg.num("domain.hi", 1.0)},
                                      {cfg.num("domain.ylo", 0.0), cfg.num("domain.yhi", 1.0)}, ell);
  } else {
    throw ConfigError("unknown domain.kind '" + kind + "'");
  }
  try {
    ec.domain.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("domain: ") + e.what());
  }

  ec.datum_spec = cfg.str("datum", "abs");
  if (cfg.has("datum.growth_A")) ec.datum_growth_A = cfg.num("datum.growth_A", 0.0);
  ec.times = cfg.nums("times", ec.times);
  if (ec.times.empty()) throw ConfigError("times: empty schedule");
  for (double t : ec.times)
    if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("times: entries must be positive and finite");
  std::sort(ec.times.begin(), ec.times.end());

  ec.grid_h = cfg.num("grid.h", ec.grid_h);
  if (!(ec.grid_h > 0.0)) throw ConfigError("grid.h must be positive");
  if (cfg.has("grid.extent")) ec.grid_extent = detail::parse_extent("grid.extent", cfg.str("grid.extent", ""));
  ec.grid_extent.lo = cfg.num("grid.lo", ec.grid_extent.lo);
  ec.grid_extent.hi = cfg.num("grid.hi", ec.grid_extent.hi);
  if (!(ec.grid_extent.hi > ec.grid_extent.lo)) throw ConfigError("grid: need lo < hi");

  ec.flow.eps_tail = cfg.num("flow.eps_tail", ec.flow.eps_tail);
  ec.flow.margin = cfg.num("flow.margin", ec.flow.margin);
  ec.flow.threads = static_cast<unsigned>(cfg.num("flow.threads", 0));
  if (!(ec.flow.eps_tail > 0.0) || !(ec.flow.margin > 0.0 && ec.flow.margin < 1.0)) {
    throw ConfigError("flow: eps_tail must be positive and margin in (0, 1)");
  }

  ec.plan.lambdas = cfg.nums("certify.lambda_set", ec.plan.lambdas);
  try {
    for (double l : ec.plan.lambdas) detail::to_rational(l);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("certify.lambda_set: ") + e.what());
  }
  const std::string plan = cfg.str("certify.plan", "grid");
  if (plan == "random") ec.plan.kind = SamplingPlan::Kind::random;
  else if (plan != "grid") throw ConfigError("certify.plan must be grid or random");
  ec.plan.samples = static_cast<std::size_t>(cfg.num("certify.samples", static_cast<double>(ec.plan.samples)));
  ec.plan.significance_factor = cfg.num("certify.significance_factor", ec.plan.significance_factor);
  ec.plan.seed = static_cast<std::uint64_t>(cfg.num("seed", 1));
  ec.refine_levels = static_cast<int>(cfg.num("certify.refine_levels", ec.refine_levels));
  if (ec.refine_levels < 1) throw ConfigError("certify.refine_levels must be at least 1");
  if (cfg.has("hunt.window")) ec.hunt_window = detail::parse_extent("hunt.window", cfg.str("hunt.window", ""));
  else ec.hunt_window = ec.grid_extent;
  ec.out_dir = cfg.str("out", ec.out_dir);
  return ec;
}

// ---------------------------------------------------------------------------
// initial data

namespace detail {

/// Exponent that keeps every scheduled time well inside the existence window.
inline double growth_for_schedule(double t_max) { return 0.119 / t_max; }

}  // namespace detail

/**
 * Datum from a spec string. 1D generators: abs, exp_abs, exp_linear(c),
 * constant(c), gauss(s), indicator, sin(k), hot_profile(c, d),
 * neglog_profile(c, d), counterexample(r0) (uses the first transform);
 * 2D: abs2, exp_abs2, constant2(c), quadratic2. `csv:<path>` loads a grid.
 */
inline Datum make_datum(const ExperimentConfig& ec) {
  const std::string& spec = ec.datum_spec;
  const double t_max = ec.times.back();
  const int dim = ec.domain.n;
  if (spec.rfind("csv:", 0) == 0) {
    std::ifstream in(spec.substr(4));
    if (!in) throw ConfigError("cannot open datum file '" + spec.substr(4) + "'");
    GridFunction g;
    try {
      g = read_csv(in);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("datum file: ") + e.what());
    }
    if (ec.datum_growth_A) g.growth_A = *ec.datum_growth_A;
    g.growth_a = g.fitted_growth_a(g.growth_A);
    Datum d = Datum::from_grid(g);
    d.label = spec;
    return d;
  }
  const auto c = detail::parse_call(spec);
  const double A_sched = ec.datum_growth_A.value_or(detail::growth_for_schedule(t_max));
  auto need_dim = [&](int n) {
    if (dim != n) throw ConfigError("datum '" + c.name + "' needs domain.dim = " + std::to_string(n));
  };
  Datum d;
  if (c.name == "abs") {
    need_dim(1);
    // |x| <= e^{A x^2} / sqrt(2 e A)
    d = Datum::line([](double x) { return std::abs(x); }, {1.0 / std::sqrt(2.0 * std::exp(1.0) * A_sched), A_sched},
                    {0.0});
  } else if (c.name == "exp_abs") {
    need_dim(1);
    d = Datum::line([](double x) { return std::exp(std::abs(x)); }, {std::exp(1.0 / (4.0 * A_sched)), A_sched}, {0.0});
  } else if (c.name == "exp_linear") {
    need_dim(1);
    const double k = c.num(0, 1.0);
    d = Datum::line([k](double x) { return std::exp(k * x); }, {std::exp(k * k / (4.0 * A_sched)), A_sched});
  } else if (c.name == "constant") {
    need_dim(1);
    const double v = c.num(0, 1.0);
    d = Datum::line([v](double) { return v; }, {std::abs(v), 0.0});
  } else if (c.name == "gauss") {
    need_dim(1);
    const double s = c.num(0, 0.5);
    if (!(s > 0.0)) throw ConfigError("gauss: s must be positive");
    d = Datum::line([s](double x) { return gauss_kernel(x, s); }, {gauss_kernel(0.0, s), 0.0});
  } else if (c.name == "indicator") {
    need_dim(1);
    d = Datum::line([](double x) { return x >= 0.0 ? 1.0 : 0.0; }, {1.0, 0.0}, {0.0});
  } else if (c.name == "sin") {
    need_dim(1);
    const double k = c.num(0, 1.0);
    d = Datum::line([k](double x) { return std::sin(k * x); }, {1.0, 0.0});
  } else if (c.name == "hot_profile" || c.name == "neglog_profile") {
    need_dim(1);
    const double cc = c.num(0, 0.25), dd = c.num(1, c.name == "hot_profile" ? -3.0 : -0.5);
    const double lo = ec.domain.xb.lo, hi = ec.domain.xb.hi, l = ec.domain.ell;
    if (ec.domain.kind != DomainSpec::Kind::interval) throw ConfigError(c.name + " needs an interval domain");
    const bool hot = c.name == "hot_profile";
    // psi = c(1/(x-lo) + 1/(hi-x)) + d is convex and blows up at both ends, where the datum tends to l
    d = Datum::line(
        [=](double x) {
          if (x <= lo || x >= hi) return l;
          const double psi = cc * (1.0 / (x - lo) + 1.0 / (hi - x)) + dd;
          return hot ? l * hot_h(psi) : l - std::exp(-psi);
        },
        {std::max(std::abs(l), hot ? std::abs(l) : std::abs(l) + std::exp(-dd)), 0.0});
  } else if (c.name == "counterexample") {
    if (ec.transforms.empty()) throw ConfigError("counterexample datum needs a transform");
    std::vector<double> dir = dim == 1 ? std::vector<double>{1.0} : std::vector<double>{1.0, 0.0};
    if (c.args.size() > 1) {
      dir.clear();
      for (std::size_t i = 1; i < c.args.size(); ++i) dir.push_back(c.num(i));
    }
    try {
      d = counterexample_datum(ec.transforms.front(), c.num(0, 1.0), dir, dim, ec.datum_growth_A);
    } catch (const std::logic_error& e) {
      throw ConfigError(std::string("counterexample: ") + e.what());
    }
  } else if (c.name == "abs2") {
    need_dim(2);
    d = Datum::plane([](double x, double y) { return std::hypot(x, y); },
                     {1.0 / std::sqrt(2.0 * std::exp(1.0) * A_sched), A_sched});
  } else if (c.name == "exp_abs2") {
    need_dim(2);
    d = Datum::plane([](double x, double y) { return std::exp(std::hypot(x, y)); },
                     {std::exp(1.0 / (4.0 * A_sched)), A_sched});
  } else if (c.name == "constant2") {
    need_dim(2);
    const double v = c.num(0, 1.0);
    d = Datum::plane([v](double, double) { return v; }, {std::abs(v), 0.0});
  } else if (c.name == "quadratic2") {
    need_dim(2);
    d = Datum::plane([](double x, double y) { return x * x + y * y; },
                     {1.0 / (std::exp(1.0) * A_sched), A_sched});
  } else {
    throw ConfigError("unknown datum '" + c.name + "'");
  }
  if (d.label.empty()) d.label = spec;
  return d;
}

/// Output grid for a run: the configured extent, or the domain itself for Dirichlet runs.
inline GridSpec output_grid(const ExperimentConfig& ec) {
  const double h = ec.grid_h;
  switch (ec.domain.kind) {
    case DomainSpec::Kind::free_space:
      return ec.domain.n == 1 ? GridSpec::line(ec.grid_extent.lo, ec.grid_extent.hi, h)
                              : GridSpec::rect(ec.grid_extent.lo, ec.grid_extent.hi, ec.grid_extent.lo,
                                               ec.grid_extent.hi, h);
    case DomainSpec::Kind::half_line:
      return GridSpec::line(ec.domain.xb.lo, std::max(ec.domain.xb.lo + h, ec.grid_extent.hi), h);
    case DomainSpec::Kind::interval:
      return GridSpec::line(ec.domain.xb.lo, ec.domain.xb.hi, h);
    case DomainSpec::Kind::rectangle:
      return GridSpec::rect(ec.domain.xb.lo, ec.domain.xb.hi, ec.domain.yb.lo, ec.domain.yb.hi, h);
  }
  return GridSpec::line(ec.grid_extent.lo, ec.grid_extent.hi, h);
}

/// Evolve under the configured domain.
inline GridFunction evolve(const ExperimentConfig& ec, const Datum& d, double t, const GridSpec& g) {
  if (ec.domain.kind == DomainSpec::Kind::free_space) return heat_evolve_free(d, t, g, ec.flow);
  return heat_evolve_dirichlet(d, ec.domain, t, g, ec.flow);
}

}  // namespace fconvex
