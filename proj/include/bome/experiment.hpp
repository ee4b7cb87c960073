#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bome/core.hpp"
#include "bome/problems.hpp"
#include "bome/solver_runner.hpp"

namespace bome {

using json = nlohmann::json;

class IoError : public Error {
 public:
  using Error::Error;
};

/// Solver fields as written in a config file or on the command line. Unset
/// fields fall back to the problem's recommended configuration.
struct SolverFields {
  std::optional<double> xi, alpha, eta, momentum, xi_v, xi_theta, stop_kkt_tol;
  std::optional<int> T, iters, kkt_every;
  std::optional<BarrierKind> barrier;
  std::optional<std::uint64_t> seed;

  /// Fields set in `other` replace those set here.
  void merge(const SolverFields& other) {
    auto take = [](auto& dst, const auto& src) {
      if (src) dst = src;
    };
    take(xi, other.xi);
    take(alpha, other.alpha);
    take(eta, other.eta);
    take(momentum, other.momentum);
    take(xi_v, other.xi_v);
    take(xi_theta, other.xi_theta);
    take(stop_kkt_tol, other.stop_kkt_tol);
    take(T, other.T);
    take(iters, other.iters);
    take(kkt_every, other.kkt_every);
    take(barrier, other.barrier);
    take(seed, other.seed);
  }
};

/// Applies `f` on top of `base`. Setting xi without alpha also sets alpha = xi,
/// and drops per-block outer steps unless xi_v or xi_theta is given.
inline SolverConfig apply_fields(SolverConfig base, const SolverFields& f) {
  if (f.xi) {
    base.outer_step_xi = *f.xi;
    if (!f.alpha) base.inner_step_alpha = *f.xi;
    if (!f.xi_v && !f.xi_theta) base.separate_outer_steps.reset();
  }
  if (f.alpha) base.inner_step_alpha = *f.alpha;
  if (f.xi_v || f.xi_theta)
    base.separate_outer_steps = OuterSteps{f.xi_v.value_or(base.xi_v()), f.xi_theta.value_or(base.xi_theta())};
  if (f.eta) base.eta = *f.eta;
  if (f.momentum) base.momentum_beta = *f.momentum;
  if (f.stop_kkt_tol) base.stop_kkt_tol = *f.stop_kkt_tol;
  if (f.T) base.inner_iters_T = *f.T;
  if (f.iters) base.max_outer_iters_K = *f.iters;
  if (f.kkt_every) base.kkt_eval_every = *f.kkt_every;
  if (f.barrier) base.barrier_kind = *f.barrier;
  if (f.seed) base.rng_seed = *f.seed;
  return base;
}

inline std::optional<BarrierKind> parse_barrier(const std::string& s) {
  if (s == "grad_norm_sq" || s == "gradnorm") return BarrierKind::GradNormSq;
  if (s == "value") return BarrierKind::Value;
  return std::nullopt;
}

inline std::optional<Method> parse_method(const std::string& s) {
  if (s == "bome") return Method::BOME;
  if (s == "gda") return Method::NaiveGDA;
  if (s == "ogd") return Method::OptimisticGD;
  return std::nullopt;
}

struct ExperimentConfig {
  std::string problem;
  problems::ProblemParams problem_params;
  Method method = Method::BOME;
  /// Problem-recommended solver settings the fields are applied to.
  SolverConfig base_solver;
  SolverFields solver_fields;
  /// Resolved configuration (base_solver + solver_fields).
  SolverConfig solver;
  /// Named preset, or an explicit point when `start_point` is set.
  std::string start_preset;
  std::optional<JointPoint> start_point;
  std::string output_path = "bome_out";
  /// Field name -> values, in key order. Empty when no sweep is requested.
  std::vector<std::pair<std::string, std::vector<json>>> sweep;
};

inline constexpr std::size_t kMaxSweepRuns = 10000;

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline bool read_number(const json& j, const std::string& field, double& out, std::vector<std::string>& errors) {
  if (!j.is_number()) {
    errors.push_back(field + ": expected a number");
    return false;
  }
  out = j.get<double>();
  return true;
}

inline bool read_int(const json& j, const std::string& field, long long& out, std::vector<std::string>& errors) {
  if (j.is_number_integer()) {
    out = j.get<long long>();
    return true;
  }
  if (j.is_number_float()) {
    const double d = j.get<double>();
    if (d == std::floor(d) && std::abs(d) < 9e15) {
      out = static_cast<long long>(d);
      return true;
    }
  }
  errors.push_back(field + ": expected an integer");
  return false;
}

inline const std::vector<std::string>& solver_keys() {
  static const std::vector<std::string> keys{"xi",       "alpha",     "T",         "eta",
                                             "barrier",  "iters",     "xi_v",      "xi_theta",
                                             "momentum", "kkt_every", "stop_kkt_tol", "seed"};
  return keys;
}

/// Parses one solver field into `f`; errors are prefixed with `prefix`.
inline void read_solver_field(const std::string& key, const json& val, const std::string& prefix,
                              SolverFields& f, std::vector<std::string>& errors) {
  const std::string name = prefix + key;
  double d = 0.0;
  long long n = 0;
  if (key == "xi" || key == "alpha" || key == "eta" || key == "momentum" || key == "xi_v" ||
      key == "xi_theta" || key == "stop_kkt_tol") {
    if (!read_number(val, name, d, errors)) return;
    if (key == "xi") f.xi = d;
    else if (key == "alpha") f.alpha = d;
    else if (key == "eta") f.eta = d;
    else if (key == "momentum") f.momentum = d;
    else if (key == "xi_v") f.xi_v = d;
    else if (key == "xi_theta") f.xi_theta = d;
    else f.stop_kkt_tol = d;
  } else if (key == "T" || key == "iters" || key == "kkt_every") {
    if (!read_int(val, name, n, errors)) return;
    if (n < -1000000000LL || n > 1000000000LL) {
      errors.push_back(name + ": out of range");
      return;
    }
    if (key == "T") f.T = static_cast<int>(n);
    else if (key == "iters") f.iters = static_cast<int>(n);
    else f.kkt_every = static_cast<int>(n);
  } else if (key == "seed") {
    if (!read_int(val, name, n, errors)) return;
    if (n < 0) {
      errors.push_back(name + ": must be >= 0");
      return;
    }
    f.seed = static_cast<std::uint64_t>(n);
  } else if (key == "barrier") {
    if (!val.is_string() || !parse_barrier(val.get<std::string>())) {
      errors.push_back(name + ": expected \"grad_norm_sq\" or \"value\"");
      return;
    }
    f.barrier = parse_barrier(val.get<std::string>());
  } else {
    errors.push_back(name + ": unknown field");
  }
}

inline std::optional<Vector> read_vector(const json& j, const std::string& field, std::vector<std::string>& errors) {
  if (!j.is_array()) {
    errors.push_back(field + ": expected an array of numbers");
    return std::nullopt;
  }
  Vector out;
  for (const auto& e : j) {
    double d = 0.0;
    if (!read_number(e, field, d, errors)) return std::nullopt;
    out.push_back(d);
  }
  return out;
}

inline void throw_if_errors(const std::vector<std::string>& errors) {
  if (errors.empty()) return;
  std::string msg = "invalid experiment configuration:";
  for (const auto& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

}  // namespace detail

/// Resolves the solver configuration and checks it. Throws ConfigError.
inline void resolve(ExperimentConfig& cfg) {
  cfg.solver = apply_fields(cfg.base_solver, cfg.solver_fields);
  if (cfg.solver_fields.seed) cfg.problem_params.seed = *cfg.solver_fields.seed;
  validate_config(cfg.solver);
}

/// Parses a JSON experiment description. `overrides` (e.g. from command-line
/// flags) take precedence over the file's solver fields. Throws ConfigError
/// with position information on malformed JSON and with every violated
/// constraint otherwise.
inline ExperimentConfig parse_config(const std::string& text, const SolverFields& overrides = {}) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error at " + detail::line_col(text, e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");

  std::vector<std::string> errors;
  ExperimentConfig cfg;
  static const std::vector<std::string> top_keys{"problem", "problem_params", "method", "solver",
                                                 "start",   "output",         "sweep"};
  for (const auto& [key, val] : doc.items()) {
    (void)val;
    if (std::find(top_keys.begin(), top_keys.end(), key) == top_keys.end())
      errors.push_back(key + ": unknown field");
  }

  if (!doc.contains("problem") || !doc["problem"].is_string()) {
    errors.emplace_back("problem: required string field");
    detail::throw_if_errors(errors);
  }
  cfg.problem = doc["problem"].get<std::string>();
  const problems::ProblemInfo* info = nullptr;
  for (const auto& p : problems::problem_catalog())
    if (p.name == cfg.problem) info = &p;
  if (!info) {
    errors.push_back("problem: unknown problem '" + cfg.problem + "'");
    detail::throw_if_errors(errors);
  }

  if (doc.contains("problem_params")) {
    const json& pp = doc["problem_params"];
    if (!pp.is_object()) {
      errors.emplace_back("problem_params: expected an object");
    } else {
      for (const auto& [key, val] : pp.items()) {
        const std::string name = "problem_params." + key;
        if (std::find(info->parameters.begin(), info->parameters.end(), key) == info->parameters.end()) {
          errors.push_back(name + ": unknown field for problem '" + cfg.problem + "'");
          continue;
        }
        double d = 0.0;
        if (detail::read_number(val, name, d, errors)) cfg.problem_params.values[key] = d;
      }
    }
  }

  if (doc.contains("method")) {
    const json& m = doc["method"];
    if (!m.is_string() || !parse_method(m.get<std::string>()))
      errors.emplace_back("method: expected \"bome\", \"gda\" or \"ogd\"");
    else
      cfg.method = *parse_method(m.get<std::string>());
  }

  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    if (!s.is_object()) {
      errors.emplace_back("solver: expected an object");
    } else {
      for (const auto& [key, val] : s.items()) detail::read_solver_field(key, val, "solver.", cfg.solver_fields, errors);
    }
  }
  cfg.solver_fields.merge(overrides);

  if (doc.contains("start")) {
    const json& st = doc["start"];
    if (st.is_string()) {
      cfg.start_preset = st.get<std::string>();
    } else if (st.is_object()) {
      for (const auto& [key, val] : st.items()) {
        (void)val;
        if (key != "v" && key != "theta") errors.push_back("start." + key + ": unknown field");
      }
      if (!st.contains("v") || !st.contains("theta")) {
        errors.emplace_back("start: explicit start needs both \"v\" and \"theta\"");
      } else {
        auto v = detail::read_vector(st["v"], "start.v", errors);
        auto th = detail::read_vector(st["theta"], "start.theta", errors);
        if (v && th) cfg.start_point = JointPoint{std::move(*v), std::move(*th)};
      }
    } else {
      errors.emplace_back("start: expected a preset name or {\"v\": [...], \"theta\": [...]}");
    }
  }

  if (doc.contains("output")) {
    if (!doc["output"].is_string() || doc["output"].get<std::string>().empty())
      errors.emplace_back("output: expected a non-empty path string");
    else
      cfg.output_path = doc["output"].get<std::string>();
  }

  if (doc.contains("sweep")) {
    const json& sw = doc["sweep"];
    if (!sw.is_object()) {
      errors.emplace_back("sweep: expected an object mapping field names to value lists");
    } else {
      std::size_t runs = 1;
      for (const auto& [key, vals] : sw.items()) {
        const std::string name = "sweep." + key;
        const auto& keys = detail::solver_keys();
        const bool solver_key = std::find(keys.begin(), keys.end(), key) != keys.end();
        if (!solver_key && key != "method") {
          errors.push_back(name + ": unknown field");
          continue;
        }
        if (!vals.is_array() || vals.empty()) {
          errors.push_back(name + ": expected a non-empty array");
          continue;
        }
        for (const auto& v : vals) {
          if (solver_key) {
            SolverFields scratch;
            detail::read_solver_field(key, v, "sweep.", scratch, errors);
          } else if (!v.is_string() || !parse_method(v.get<std::string>())) {
            errors.push_back(name + ": expected \"bome\", \"gda\" or \"ogd\"");
          }
        }
        cfg.sweep.emplace_back(key, std::vector<json>(vals.begin(), vals.end()));
        runs = std::min(runs * vals.size(), kMaxSweepRuns + 1);
      }
      if (runs > kMaxSweepRuns)
        errors.push_back("sweep: cross product exceeds " + std::to_string(kMaxSweepRuns) + " runs");
    }
  }

  // The recommended configuration may depend on the data (step sizes from
  // smoothness constants), so the problem is instantiated here once.
  if (cfg.solver_fields.seed) cfg.problem_params.seed = *cfg.solver_fields.seed;
  std::optional<problems::ProblemInstance> made;
  try {
    made = problems::make_problem(cfg.problem, cfg.problem_params);
  } catch (const ConfigError& e) {
    errors.emplace_back(std::string("problem_params: ") + e.what());
    detail::throw_if_errors(errors);
  }
  const problems::ProblemInstance& inst = *made;
  cfg.base_solver = inst.recommended;
  if (cfg.start_point) {
    if (!cfg.start_point->is_valid() || cfg.start_point->dim_v() != inst.oracle.dim_v ||
        cfg.start_point->dim_theta() != inst.oracle.dim_theta)
      errors.push_back("start: expected finite v of size " + std::to_string(inst.oracle.dim_v) +
                       " and theta of size " + std::to_string(inst.oracle.dim_theta));
  } else if (!cfg.start_preset.empty()) {
    try {
      (void)inst.start(cfg.start_preset);
    } catch (const ConfigError& e) {
      errors.push_back(std::string("start: ") + e.what());
    }
  }

  cfg.solver = apply_fields(cfg.base_solver, cfg.solver_fields);
  try {
    validate_config(cfg.solver);
  } catch (const ConfigError& e) {
    errors.emplace_back(e.what());
  }
  detail::throw_if_errors(errors);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, const SolverFields& overrides = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "': " + std::strerror(errno));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

/// One resolved configuration per point of the sweep cross product, the first
/// sweep key varying slowest. Without a sweep the result is {cfg}.
inline std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& cfg) {
  std::size_t total = 1;
  for (const auto& [key, vals] : cfg.sweep) total *= vals.size();
  if (total > kMaxSweepRuns) throw ConfigError("sweep: cross product exceeds " + std::to_string(kMaxSweepRuns) + " runs");

  std::vector<ExperimentConfig> out;
  out.reserve(total);
  std::vector<std::size_t> idx(cfg.sweep.size(), 0);
  for (std::size_t r = 0; r < total; ++r) {
    ExperimentConfig c = cfg;
    c.sweep.clear();
    SolverFields point;
    std::vector<std::string> errors;
    for (std::size_t s = 0; s < cfg.sweep.size(); ++s) {
      const auto& [key, vals] = cfg.sweep[s];
      const json& v = vals[idx[s]];
      if (key == "method")
        c.method = *parse_method(v.get<std::string>());
      else
        detail::read_solver_field(key, v, "sweep.", point, errors);
    }
    detail::throw_if_errors(errors);
    c.solver_fields.merge(point);
    resolve(c);
    out.push_back(std::move(c));
    for (std::size_t s = cfg.sweep.size(); s-- > 0;) {
      if (++idx[s] < cfg.sweep[s].second.size()) break;
      idx[s] = 0;
    }
  }
  return out;
}

/// The start point a config asks for on an instantiated problem.
inline JointPoint resolve_start(const ExperimentConfig& cfg, const problems::ProblemInstance& inst) {
  if (cfg.start_point) return *cfg.start_point;
  if (!cfg.start_preset.empty()) return inst.start(cfg.start_preset);
  return inst.default_start();
}

namespace detail {

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline constexpr const char* kTraceCsvHeader = "k,f,q_hat,lambda,phi,delta_norm,grad_qhat_norm,kkt,wall_us";

/// One line per record; kkt is blank where the measure was not evaluated.
inline void emit_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing: " + std::strerror(errno));
  out << kTraceCsvHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.iter_k << ',' << detail::fmt17(r.f_value) << ',' << detail::fmt17(r.q_hat) << ','
        << detail::fmt17(r.lambda_k) << ',' << detail::fmt17(r.phi_k) << ',' << detail::fmt17(r.delta_norm)
        << ',' << detail::fmt17(r.grad_qhat_norm) << ',' << (r.kkt_value ? detail::fmt17(*r.kkt_value) : "")
        << ',' << r.wall_time_micros << '\n';
  }
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

/// Parses a file written by emit_trace_csv. kkt_proxy_value is not stored in
/// the CSV and stays empty.
inline std::vector<StepDiagnostics> read_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "': " + std::strerror(errno));
  std::string line;
  if (!std::getline(in, line) || line != kTraceCsvHeader)
    throw IoError("'" + path + "': missing or unexpected header");
  std::vector<StepDiagnostics> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    for (;;) {
      const std::size_t comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (cells.size() != 9) throw IoError("'" + path + "' line " + std::to_string(lineno) + ": expected 9 columns");
    auto num = [&](const std::string& s) {
      char* end = nullptr;
      const double x = std::strtod(s.c_str(), &end);
      if (s.empty() || *end != '\0')
        throw IoError("'" + path + "' line " + std::to_string(lineno) + ": bad number '" + s + "'");
      return x;
    };
    StepDiagnostics d;
    d.iter_k = static_cast<int>(num(cells[0]));
    d.f_value = num(cells[1]);
    d.q_hat = num(cells[2]);
    d.lambda_k = num(cells[3]);
    d.phi_k = num(cells[4]);
    d.delta_norm = num(cells[5]);
    d.grad_qhat_norm = num(cells[6]);
    if (!cells[7].empty()) d.kkt_value = num(cells[7]);
    d.wall_time_micros = static_cast<std::int64_t>(num(cells[8]));
    out.push_back(d);
  }
  return out;
}

inline json config_to_json(const SolverConfig& c) {
  json j;
  j["xi"] = c.outer_step_xi;
  j["alpha"] = c.inner_step_alpha;
  j["T"] = c.inner_iters_T;
  j["eta"] = c.eta;
  j["barrier"] = to_string(c.barrier_kind);
  j["iters"] = c.max_outer_iters_K;
  j["xi_v"] = c.xi_v();
  j["xi_theta"] = c.xi_theta();
  j["momentum"] = c.momentum_beta;
  j["kkt_every"] = c.kkt_eval_every;
  j["stop_kkt_tol"] = c.stop_kkt_tol ? json(*c.stop_kkt_tol) : json(nullptr);
  j["seed"] = c.rng_seed;
  return j;
}

inline json trace_summary(const Trace& t) {
  json j;
  j["problem"] = t.problem_name;
  j["method"] = to_string(t.method);
  j["config"] = config_to_json(t.config_snapshot);
  j["iterations"] = t.records.size();
  j["termination"] = to_string(t.termination);
  if (!t.error_message.empty()) j["error"] = t.error_message;
  j["final_f"] = t.final_f;
  if (t.final_kkt) {
    j["final_kkt"] = t.final_kkt->total;
    j["final_kkt_variant"] = to_string(t.final_kkt->variant);
  } else {
    j["final_kkt"] = nullptr;
  }
  json rm = json::array();
  if (t.final_kkt || !t.records.empty()) {
    try {
      for (const auto& [k, v] : running_min_kkt(t)) rm.push_back(json::array({k, v}));
    } catch (const Error&) {
    }
  }
  j["running_min_kkt"] = rm;
  if (t.metadata && t.metadata->known_optimum) {
    const JointPoint& opt = *t.metadata->known_optimum;
    if (opt.dim_v() == t.final_point.dim_v() && opt.dim_theta() == t.final_point.dim_theta())
      j["dist_to_opt"] = norm(subtract(t.final_point.flat(), opt.flat()));
  }
  if (t.metadata && t.metadata->known_theta_opt && t.metadata->known_theta_opt->size() == t.final_point.dim_theta())
    j["dist_theta_to_opt"] = norm(subtract(t.final_point.theta, *t.metadata->known_theta_opt));
  j["total_wall_us"] = t.total_wall_micros();
  return j;
}

/// Writes a JSON array with one summary object per trace.
inline void emit_summary_json(const std::vector<Trace>& traces, const std::string& path) {
  if (traces.empty()) throw Error("emit_summary_json: no traces to summarize");
  json arr = json::array();
  for (const auto& t : traces) arr.push_back(trace_summary(t));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing: " + std::strerror(errno));
  out << arr.dump(2) << '\n';
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace bome
