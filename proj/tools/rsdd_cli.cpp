// rsdd command line: run, oracle, check, demo, validate.
//
// Exit codes: 0 ok, 1 validation failure / bad usage, 2 solver failure.
// Errors also go to stderr as one JSON line: {"error": kind, "message": ...}.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rsdd/rsdd.hpp"

namespace {

using namespace rsdd;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kSolver = 2;

struct Failure {
  int code;
  std::string kind;
  std::string message;
};

int report(const Failure& f) {
  std::cerr << json{{"error", f.kind}, {"message", f.message}, {"exit", f.code}}.dump() << "\n";
  return f.code;
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt_vec(const Vector& v, const char* spec = "%.6g") {
  std::string s = "[";
  for (Index k = 0; k < v.size(); ++k) s += (k ? ", " : "") + fmt(v(k), spec);
  return s + "]";
}

// Seed: --seed, else RSDD_SEED, else 1.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("RSDD_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw Failure{kInvalid, "usage", std::string("RSDD_SEED is not an unsigned integer: '") + env + "'"};
  }
  return 1;
}

struct ProblemSource {
  std::string problem_file;
  std::string microgrid;  // "default" or a config file
  bool random = false;
  int agents = 3, dim = 2, coupling = 2;

  void add(CLI::App* app) {
    auto* a = app->add_option("--problem", problem_file, "problem file (rsdd.problem.v1)");
    auto* b = app->add_option("--microgrid", microgrid, "'default' or a microgrid config file");
    auto* c = app->add_flag("--random", random, "random instance drawn from --seed");
    a->excludes(b)->excludes(c);
    b->excludes(c);
    app->add_option("--agents", agents, "random instance: number of agents")->check(CLI::PositiveNumber);
    app->add_option("--dim", dim, "random instance: dimension per agent")->check(CLI::PositiveNumber);
    app->add_option("--coupling", coupling, "random instance: coupling rows")->check(CLI::PositiveNumber);
  }

  ConstraintCoupledProblem load(std::uint64_t seed) const {
    if (!problem_file.empty()) return load_problem(problem_file);
    if (microgrid == "default") return build_microgrid_instance(default_microgrid_config());
    if (!microgrid.empty()) return build_microgrid_instance(load_microgrid_config(microgrid));
    if (random) return build_random_instance(agents, dim, coupling, seed);
    throw Failure{kInvalid, "usage", "no problem given: use --problem, --microgrid or --random"};
  }
};

void require_valid(const ConstraintCoupledProblem& p) {
  const auto rep = validate_problem(p);
  if (rep.ok()) return;
  std::string all;
  for (const auto& f : rep.findings) all += (all.empty() ? "" : "; ") + f;
  throw Failure{kInvalid, "validation", all};
}

CentralizedResult oracle_or_fail(const ConstraintCoupledProblem& p) {
  try {
    return solve_centralized(p);
  } catch (const OracleError& e) {
    throw Failure{kSolver, "solver", e.what()};
  }
}

void print_summary(const RunTrace& trace, const MetricsTable& table) {
  std::cout << "status: " << to_string(trace.status);
  if (!trace.status_message.empty()) std::cout << " (" << trace.status_message << ")";
  std::cout << "\niterations: " << trace.iterations() << "\nM: " << fmt(trace.M) << "\nf*: " << fmt(table.f_star, "%.10g")
            << "\n";
  if (!table.rows.empty()) {
    const auto& r = table.rows.back();
    std::cout << "cost: " << fmt(r.cost, "%.10g") << "\n"
              << (table.absolute_error ? "cost error (abs): " : "cost error (rel): ") << fmt(r.cost_error_norm) << "\n"
              << "max violation: " << fmt(r.max_violation) << "\n"
              << "sum rho: " << fmt(r.sum_rho) << "\n";
  }
  if (trace.iterations() > 0 && trace.problem.size() <= 4) {
    for (std::size_t i = 0; i < trace.problem.size(); ++i)
      std::cout << "x" << i + 1 << ": " << fmt_vec(trace.last()[i].x) << "\n";
  }
  for (const auto& d : trace.diagnostics) std::cout << "diagnostic: " << d << "\n";
}

// Runs, writes artifacts, checks invariants. Returns the exit code.
int execute(const ConstraintCoupledProblem& p, const Graph& g, const AlgorithmConfig& cfg, const std::string& out,
            ArtifactFormat format, const std::string& trace_out) {
  const auto oracle = make_oracle_artifact(p, oracle_or_fail(p));
  auto c = cfg;
  if (!c.M) c.M = oracle.suggested_M;
  const auto trace = run(p, g, c);
  const auto table = compute_metrics(trace, oracle);
  if (!out.empty()) emit_run_artifact(table, out, format);
  if (!trace_out.empty()) save_trace(trace, trace_out);
  print_summary(trace, table);
  if (trace.status == RunStatus::solver_error) throw Failure{kSolver, "solver", trace.status_message};
  const auto rep = check_trace(trace);
  if (!rep.ok()) {
    const auto& v = rep.violations.front();
    throw Failure{kInvalid, "invariant",
                  v.invariant + " violated at iteration " + std::to_string(v.iteration) + ": " + v.detail};
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relaxation-and-duality distributed solver for constraint-coupled QPs"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "run the distributed algorithm and write per-iteration metrics");
  ProblemSource run_src;
  run_src.add(run_cmd);
  std::string graph_spec = "cycle", out, trace_out, format_name = "csv";
  std::optional<double> M;
  double gamma0 = 1.0, exponent = 0.8;
  int iters = 1000, threads = 1;
  bool early_stop = false;
  std::optional<std::uint64_t> seed;
  run_cmd->add_option("--graph", graph_spec, "path | cycle | star | complete | er:<p>[:<seed>]");
  run_cmd->add_option("--M", M, "penalty level (default: 10 (||mu*||_1 + 1))");
  run_cmd->add_option("--gamma0", gamma0, "step size gamma0 / (t+1)^exponent");
  run_cmd->add_option("--exponent", exponent, "step size exponent, in (0.5, 1]");
  run_cmd->add_option("--iters", iters, "iterations")->check(CLI::PositiveNumber);
  run_cmd->add_option("--seed", seed, "seed for --random and er graphs (env RSDD_SEED)");
  run_cmd->add_option("--out", out, "metrics file");
  run_cmd->add_option("--format", format_name, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  run_cmd->add_option("--trace", trace_out, "full trace file (json)");
  run_cmd->add_option("--threads", threads, "worker threads for local steps")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--early-stop", early_stop, "stop once feasible, rho-free and stagnant");

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "centralized optimum, multipliers and suggested M");
  ProblemSource oracle_src;
  oracle_src.add(oracle_cmd);
  std::optional<std::uint64_t> oracle_seed;
  std::string oracle_out;
  oracle_cmd->add_option("--seed", oracle_seed, "seed for --random (env RSDD_SEED)");
  oracle_cmd->add_option("--out", oracle_out, "oracle result file (json)");

  // check
  auto* check_cmd = app.add_subcommand("check", "run the invariant suite on a trace file");
  std::string check_file;
  check_cmd->add_option("trace", check_file, "trace file")->required();

  // demo
  auto* demo_cmd = app.add_subcommand("demo", "two-agent example end to end");
  int demo_iters = 5000;
  std::string demo_out;
  demo_cmd->add_option("--iters", demo_iters, "iterations")->check(CLI::PositiveNumber);
  demo_cmd->add_option("--out", demo_out, "metrics file (csv)");

  // validate
  auto* validate_cmd = app.add_subcommand("validate", "check convexity, compactness and Slater");
  ProblemSource validate_src;
  validate_src.add(validate_cmd);
  std::optional<std::uint64_t> validate_seed;
  validate_cmd->add_option("--seed", validate_seed, "seed for --random (env RSDD_SEED)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    return report({kInvalid, "usage", e.what()});
  }

  try {
    if (run_cmd->parsed()) {
      const auto s = resolve_seed(seed);
      const auto p = run_src.load(s);
      require_valid(p);
      AlgorithmConfig cfg;
      cfg.M = M;
      cfg.schedule = StepSizeSchedule::harmonic(gamma0, exponent);
      cfg.max_iters = iters;
      cfg.early_stop = early_stop;
      cfg.threads = threads;
      const auto g = build_graph(parse_topology(graph_spec, s), p.size());
      return execute(p, g, cfg, out, format_name == "json" ? ArtifactFormat::json : ArtifactFormat::csv, trace_out);
    }
    if (oracle_cmd->parsed()) {
      const auto p = oracle_src.load(resolve_seed(oracle_seed));
      const auto c = oracle_or_fail(p);
      std::cout << "f* = " << fmt(c.f_star) << "\nmu* = " << fmt_vec(c.mu_star) << "\nsuggested M = "
                << fmt(suggested_M(c.mu_star)) << "\n";
      if (!oracle_out.empty()) io::write_file(oracle_out, oracle_to_json(make_oracle_artifact(p, c)).dump(1) + "\n");
      return kOk;
    }
    if (check_cmd->parsed()) {
      const auto trace = load_trace(check_file);
      const auto rep = check_trace(trace);
      for (const auto& v : rep.violations)
        std::cout << "violation: " << v.invariant << " at iteration " << v.iteration << ": " << v.detail << "\n";
      if (!rep.ok()) {
        const auto& v = rep.violations.front();
        throw Failure{kInvalid, "invariant",
                      v.invariant + " violated at iteration " + std::to_string(v.iteration) + ": " + v.detail};
      }
      std::cout << "ok: " << rep.snapshots_checked << " snapshots, all invariants hold\n";
      return kOk;
    }
    if (demo_cmd->parsed()) {
      const auto p = two_agent_demo();
      AlgorithmConfig cfg;
      cfg.M = 10.0;
      cfg.schedule = StepSizeSchedule::harmonic(1.0, 0.8);
      cfg.max_iters = demo_iters;
      cfg.early_stop = false;
      std::cout << "problem: min x1^2 + (x2 - 2)^2  s.t.  x1 + x2 <= 1  (optimum 0.5 at (-0.5, 1.5))\n";
      return execute(p, build_graph({TopologyKind::path}, 2), cfg, demo_out, ArtifactFormat::csv, "");
    }
    if (validate_cmd->parsed()) {
      const auto p = validate_src.load(resolve_seed(validate_seed));
      const auto rep = validate_problem(p);
      for (const auto& f : rep.findings) std::cout << "finding: " << f << "\n";
      if (rep.slater_margin) std::cout << "slater margin: " << fmt(*rep.slater_margin) << "\n";
      if (!rep.ok()) throw Failure{kInvalid, "validation", rep.findings.front()};
      std::cout << "ok\n";
      return kOk;
    }
  } catch (const Failure& f) {
    return report(f);
  } catch (const ParseError& e) {
    return report({kInvalid, "parse", e.what()});
  } catch (const ProblemError& e) {
    return report({kInvalid, "problem", e.what()});
  } catch (const GraphError& e) {
    return report({kInvalid, "graph", e.what()});
  } catch (const std::invalid_argument& e) {
    return report({kInvalid, "usage", e.what()});
  } catch (const std::exception& e) {
    return report({kSolver, "internal", e.what()});
  }
  return kInvalid;
}
