// bome: run bilevel experiments from JSON configs and write CSV/JSON results.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bome/experiment.hpp"
#include "bome/gradcheck.hpp"
#include "bome/problems.hpp"
#include "bome/solver_runner.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

struct Flags {
  double eta = 0, alpha = 0, xi = 0;
  int T = 0, iters = 0;
  std::string barrier;
  std::uint64_t seed = 0;
  std::string out;
  std::string export_data;
  unsigned threads = 0;

  CLI::Option *eta_o = nullptr, *alpha_o = nullptr, *xi_o = nullptr, *T_o = nullptr, *iters_o = nullptr,
              *barrier_o = nullptr, *seed_o = nullptr;
};

void add_solver_flags(CLI::App* cmd, Flags& f) {
  f.eta_o = cmd->add_option("--eta", f.eta, "barrier coefficient");
  f.T_o = cmd->add_option("--T", f.T, "inner gradient steps per outer step");
  f.alpha_o = cmd->add_option("--alpha", f.alpha, "inner step size");
  f.xi_o = cmd->add_option("--xi", f.xi, "outer step size (also sets alpha unless --alpha is given)");
  f.iters_o = cmd->add_option("--iters", f.iters, "outer iterations");
  f.barrier_o = cmd->add_option("--barrier", f.barrier, "barrier kind")->check(CLI::IsMember({"gradnorm", "value"}));
  f.seed_o = cmd->add_option("--seed", f.seed, "data and solver seed");
  cmd->add_option("--out", f.out, "output directory (overrides BOME_OUTPUT_DIR and the config)");
}

bome::SolverFields overrides_from(const Flags& f) {
  bome::SolverFields o;
  if (f.eta_o->count()) o.eta = f.eta;
  if (f.T_o->count()) o.T = f.T;
  if (f.alpha_o->count()) o.alpha = f.alpha;
  if (f.xi_o->count()) o.xi = f.xi;
  if (f.iters_o->count()) o.iters = f.iters;
  if (f.barrier_o->count()) o.barrier = bome::parse_barrier(f.barrier);
  if (f.seed_o->count()) o.seed = f.seed;
  return o;
}

fs::path output_dir(const Flags& f, const bome::ExperimentConfig& cfg) {
  fs::path dir = cfg.output_path;
  if (const char* env = std::getenv("BOME_OUTPUT_DIR"); env && *env) dir = env;
  if (!f.out.empty()) dir = f.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw bome::IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void print_warnings(const bome::SolverConfig& cfg, const bome::BilevelOracle& oracle) {
  for (const auto& w : bome::validate_config(cfg, oracle.metadata)) std::cerr << "warning: " << w << "\n";
}

void print_result(const std::string& label, const bome::Trace& t) {
  std::printf("%s  %s/%s  iters=%zu  final_f=%.6g  final_kkt=%s  termination=%s\n", label.c_str(),
              t.problem_name.c_str(), bome::to_string(t.method), t.records.size(), t.final_f,
              t.final_kkt ? std::to_string(t.final_kkt->total).c_str() : "n/a", bome::to_string(t.termination));
  if (!t.error_message.empty()) std::printf("  error: %s\n", t.error_message.c_str());
}

int cmd_run(const std::string& path, const Flags& f) {
  const bome::ExperimentConfig cfg = bome::load_config(path, overrides_from(f));
  if (!cfg.sweep.empty()) throw bome::ConfigError("config has a sweep section; use the 'sweep' subcommand");
  const auto inst = bome::problems::make_problem(cfg.problem, cfg.problem_params);
  print_warnings(cfg.solver, inst.oracle);
  const fs::path dir = output_dir(f, cfg);
  if (!f.export_data.empty()) {
    if (!inst.export_data) throw bome::ConfigError("problem '" + cfg.problem + "' has no dataset to export");
    inst.export_data(f.export_data);
  }

  const bome::Trace trace = bome::run(inst.oracle, bome::resolve_start(cfg, inst), cfg.solver, cfg.method);
  bome::emit_trace_csv(trace, (dir / "trace.csv").string());
  bome::emit_summary_json({trace}, (dir / "summary.json").string());
  print_result("run", trace);
  std::printf("wrote %s\n", dir.string().c_str());
  return trace.termination == bome::Termination::NumericalError ? kExitNumerical : 0;
}

int cmd_sweep(const std::string& path, const Flags& f) {
  const bome::ExperimentConfig cfg = bome::load_config(path, overrides_from(f));
  const std::vector<bome::ExperimentConfig> plan = bome::expand_sweep(cfg);
  const fs::path dir = output_dir(f, cfg);

  // Problem data depends only on the seed; build each distinct instance once
  // and give every job its own oracle copy.
  std::vector<bome::BilevelOracle> oracles;
  std::vector<bome::RunJob> jobs;
  oracles.reserve(plan.size());
  std::map<std::uint64_t, bome::problems::ProblemInstance> instances;
  for (const auto& c : plan) {
    auto it = instances.find(c.problem_params.seed);
    if (it == instances.end())
      it = instances.emplace(c.problem_params.seed, bome::problems::make_problem(c.problem, c.problem_params)).first;
    print_warnings(c.solver, it->second.oracle);
    oracles.push_back(it->second.oracle);
  }
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& inst = instances.at(plan[i].problem_params.seed);
    jobs.push_back({&oracles[i], bome::resolve_start(plan[i], inst), plan[i].solver, plan[i].method});
  }

  const std::vector<bome::Trace> traces = bome::run_grid(jobs, f.threads);
  bool numerical = false;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%04zu.csv", i);
    bome::emit_trace_csv(traces[i], (dir / name).string());
    print_result(name, traces[i]);
    numerical |= traces[i].termination == bome::Termination::NumericalError;
  }
  bome::emit_summary_json(traces, (dir / "summary.json").string());
  std::printf("wrote %zu runs to %s\n", traces.size(), dir.string().c_str());
  return numerical ? kExitNumerical : 0;
}

int cmd_gradcheck(const std::string& problem, std::size_t points, std::uint64_t seed, double h, double tol) {
  bome::problems::ProblemParams params;
  params.seed = seed;
  const auto inst = bome::problems::make_problem(problem, params);
  std::mt19937_64 rng(seed);
  std::vector<bome::JointPoint> pts;
  for (std::size_t i = 0; i < points; ++i) pts.push_back(inst.sample_smooth_point(rng));
  const bome::GradCheckReport rep = bome::check_oracle_gradients(inst.oracle, pts, h, tol);
  std::printf("gradcheck %s (f and g, h=%g, tol=%g)\n%s", problem.c_str(), h, tol, rep.to_string().c_str());
  if (inst.oracle.exact_inner_opt) {
    const auto rows =
        bome::check_plug_in_estimator(inst.oracle, pts, {1, 2, 4, 8, 16}, inst.recommended.inner_step_alpha);
    std::printf("\nplug-in estimator error (alpha=%g)\n%s", inst.recommended.inner_step_alpha,
                bome::format_plug_in_table(rows).c_str());
  }
  return rep.passed ? 0 : kExitNumerical;
}

int cmd_list() {
  for (const auto& info : bome::problems::problem_catalog()) {
    std::printf("%-11s %s\n", info.name.c_str(), info.description.c_str());
    if (!info.parameters.empty()) {
      std::printf("            params:");
      for (const auto& p : info.parameters) std::printf(" %s", p.c_str());
      std::printf("\n");
    }
    const auto inst = bome::problems::make_problem(info.name);
    std::printf("            starts:");
    for (const auto& s : inst.starts) std::printf(" %s", s.first.c_str());
    std::printf("\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"First-order bilevel optimization experiments"};
  app.require_subcommand(1);

  Flags run_flags, sweep_flags;
  std::string run_cfg, sweep_cfg, gc_problem;

  auto* run = app.add_subcommand("run", "run a single experiment");
  run->add_option("config", run_cfg, "experiment JSON")->required();
  add_solver_flags(run, run_flags);
  run->add_option("--export-data", run_flags.export_data, "also write the problem's training data as CSV");

  auto* sweep = app.add_subcommand("sweep", "run the cross product of a config's sweep section");
  sweep->add_option("config", sweep_cfg, "experiment JSON")->required();
  add_solver_flags(sweep, sweep_flags);
  sweep->add_option("--threads", sweep_flags.threads, "worker threads (default: hardware concurrency)");

  std::size_t gc_points = 20;
  std::uint64_t gc_seed = 0;
  double gc_h = 1e-5, gc_tol = 1e-5;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of a problem's gradients");
  gc->add_option("problem", gc_problem, "problem name")->required();
  gc->add_option("--points", gc_points, "number of random points");
  gc->add_option("--seed", gc_seed, "seed for data and points");
  gc->add_option("--fd-step", gc_h, "finite-difference step h");
  gc->add_option("--tol", gc_tol, "relative error tolerance");

  auto* list = app.add_subcommand("list-problems", "show built-in problems");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_cfg, run_flags);
    if (*sweep) return cmd_sweep(sweep_cfg, sweep_flags);
    if (*gc) return cmd_gradcheck(gc_problem, gc_points, gc_seed, gc_h, gc_tol);
    if (*list) return cmd_list();
  } catch (const bome::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const bome::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
