// tufw: benchmark runner for Taylor-point updating Frank-Wolfe.
//
//   tufw run        --synth 32,4,1 --loss logistic --rule dbd-sqrt --iters 2000
//   tufw reference  --synth 32,4,1 --loss logistic --lambda 1 --out ref.json
//   tufw check      --bound convex-deterministic --reference ref.json traces/*.jsonl
//   tufw summarize  out/
//
// Output goes under --out, else $TUFW_OUTPUT_ROOT, else ./tufw_out.

#include "tufw/harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace tufw;

namespace {

struct ProblemFlags {
  std::string data;
  std::string synth;
  Index dims = 0;
  std::string loss = "logistic";
  std::string norm = "l1";
  std::string set = "l1";
  double lambda = 10.0;
};

void add_problem_flags(CLI::App* app, ProblemFlags& f) {
  app->add_option("--data", f.data, "LIBSVM file")->check(CLI::ExistingFile);
  app->add_option("--synth", f.synth, "synthetic instance n,p,seed");
  app->add_option("--dims", f.dims, "feature dimension override");
  app->add_option("--loss", f.loss, "quadratic | logistic | sigmoid-sq")->capture_default_str();
  app->add_option("--norm", f.norm, "primal norm: l1 | l2")->capture_default_str();
  app->add_option("--set", f.set, "feasible set: l1 | simplex")->capture_default_str();
  app->add_option("--lambda", f.lambda, "set radius")->capture_default_str();
}

SynthSpec parse_synth(const std::string& text) {
  std::istringstream in(text);
  SynthSpec s;
  char c1 = 0;
  char c2 = 0;
  if (!(in >> s.n >> c1 >> s.p >> c2 >> s.seed) || c1 != ',' || c2 != ',') {
    throw ConfigError("--synth expects n,p,seed");
  }
  return s;
}

void apply_problem_flags(const ProblemFlags& f, ExperimentConfig& c) {
  if (!f.data.empty()) c.data_path = f.data;
  if (!f.synth.empty()) c.synth = parse_synth(f.synth);
  if (f.dims > 0) c.dims = f.dims;
  c.loss = parse_loss_kind(f.loss);
  c.norm = parse_primal_norm(f.norm);
  c.set = parse_set_kind(f.set);
  c.lambda = f.lambda;
}

fs::path output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("TUFW_OUTPUT_ROOT"); env && *env) return env;
  return "tufw_out";
}

void warn_remapped(const Problem& problem) {
  if (problem.labels_remapped() > 0) {
    std::cerr << "warning: remapped " << problem.labels_remapped() << " labels for "
              << to_string(problem.family()) << '\n';
  }
}

std::vector<TraceFile> load_traces(const std::vector<std::string>& inputs) {
  std::vector<fs::path> paths;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.path().extension() == ".jsonl") paths.push_back(e.path());
      }
    } else {
      paths.emplace_back(in);
    }
  }
  std::sort(paths.begin(), paths.end());
  std::vector<TraceFile> traces;
  for (const auto& p : paths) traces.push_back(load_trace(p));
  return traces;
}

int cmd_run(const ProblemFlags& pf, const std::vector<std::string>& solvers,
            const std::vector<std::string>& rules, const std::string& sampling,
            const std::string& steps, long iters, long horizon, std::uint64_t seed, int trials,
            long gap_every, double stop_gap, const std::string& hmode,
            const std::string& ret, const std::vector<double>& eps, const std::string& out,
            int jobs, const std::string& bound, const std::string& reference) {
  ExperimentConfig c;
  apply_problem_flags(pf, c);
  c.solvers.clear();
  for (const auto& s : solvers) c.solvers.push_back(parse_solver_kind(s));
  c.rules.clear();
  for (const auto& r : rules) c.rules.push_back(parse_rule_kind(r));
  c.sampling = parse_sampling(sampling);
  c.steps.kind = parse_step_kind(steps);
  c.iterations = iters;
  if (horizon > 0) c.horizon = horizon;
  c.seed = seed;
  c.trials = trials;
  c.gap_every = gap_every;
  if (stop_gap > 0.0) c.stop_gap = stop_gap;
  c.hessian_mode = parse_hessian_mode(hmode);
  c.return_policy = parse_return_policy(ret);
  if (!eps.empty()) c.eps_targets = eps;
  c.out_dir = output_root(out);
  c.jobs = jobs;
  if (!bound.empty()) c.bound = parse_bound_kind(bound);
  if (!reference.empty()) c.reference_path = reference;

  warn_remapped(load_problem(c));
  const ExperimentResult result = run_experiment(c);
  std::ifstream in(result.summary);
  std::cout << format_summary_table(Json::parse(in));
  for (const auto& f : result.failed) {
    std::cerr << "failed: " << f.cell << " trial " << f.trial << ": " << f.error << '\n';
  }
  std::cout << result.traces.size() << " traces in " << c.out_dir.string() << ", "
            << result.bound_violations << " bound violations, " << result.failed.size()
            << " failed cells\n";
  return result.failed.empty() && result.bound_violations == 0 ? 0 : 1;
}

int cmd_reference(const ProblemFlags& pf, long iters, const std::string& out) {
  ExperimentConfig c;
  apply_problem_flags(pf, c);
  const Problem problem = load_problem(c);
  warn_remapped(problem);
  const FeasibleSet set(c.set, c.lambda);
  const ReferenceSolution ref = compute_reference(problem, set, iters);
  fs::path path = out.empty() ? output_root("") / "reference.json" : fs::path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_reference(path, ref);
  std::cout.precision(17);
  std::cout << "F* = " << ref.f_star << " (" << ref.iterations << " iterations) -> "
            << path.string() << '\n';
  return 0;
}

int cmd_check(const std::vector<std::string>& inputs, const std::string& bound,
              const std::string& reference, double slack, long k_max) {
  const auto traces = load_traces(inputs);
  if (traces.empty()) throw ConfigError("no traces given");
  const BoundKind kind = parse_bound_kind(bound);
  std::optional<double> f_star;
  std::optional<ReferenceSolution> ref;
  if (!reference.empty()) {
    ref = load_reference(reference);
    f_star = ref->f_star;
  }
  std::map<std::string, std::vector<const TraceFile*>> cells;
  for (const auto& t : traces) cells[t.header.value("cell", std::string("?"))].push_back(&t);

  BoundCheckOptions options;
  if (slack > 0.0) options.slack = slack;
  options.k_max = k_max;
  std::size_t violations = 0;
  Json out = Json::array();
  for (const auto& [cell, group] : cells) {
    const ProblemConstants constants = constants_from_json(group.front()->header.at("constants"));
    if (ref && ref->fingerprint != constants.fingerprint) {
      throw ConfigError("reference does not match the traces' problem");
    }
    const BoundReport report = bound_check(group, constants, kind, f_star, options);
    violations += report.violations.size();
    Json entry = to_json(report);
    entry["cell"] = cell;
    out.push_back(entry);
  }
  std::cout << out.dump(2) << '\n';
  return violations == 0 ? 0 : 1;
}

int cmd_summarize(const std::vector<std::string>& inputs, const std::vector<double>& eps,
                  bool json) {
  const auto traces = load_traces(inputs);
  const Json summary = summarize(traces, eps.empty() ? std::vector<double>{1e-1, 1e-3, 1e-5} : eps);
  if (json) {
    std::cout << summary.dump(2) << '\n';
  } else {
    std::cout << format_summary_table(summary);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Taylor-point updating Frank-Wolfe benchmark runner"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  ProblemFlags run_pf;
  std::vector<std::string> solvers{"tufw"};
  std::vector<std::string> rules{"dbd-sqrt"};
  std::string sampling = "cyclic";
  std::string steps = "harmonic";
  long iters = 1000;
  long horizon = 0;
  std::uint64_t seed = 0;
  int trials = 1;
  long gap_every = -1;
  double stop_gap = 0.0;
  std::string hmode = "dense";
  std::string ret = "last";
  std::vector<double> eps;
  std::string out;
  int jobs = 1;
  std::string bound;
  std::string reference;

  auto* run = app.add_subcommand("run", "run an experiment matrix");
  add_problem_flags(run, run_pf);
  run->add_option("--solver", solvers, "tufw | fw | fw-ada (repeatable)");
  run->add_option("--rule", rules, "sbd-sqrt | dbd-sqrt | sbd-k4 | dbd-k4 | empty | full");
  run->add_option("--sampling", sampling, "cyclic | uniform")->capture_default_str();
  run->add_option("--steps", steps, "harmonic | fixed | adaptive")->capture_default_str();
  run->add_option("--iters", iters, "iterations K")->capture_default_str();
  run->add_option("--K", horizon, "horizon for fourth-root rules and fixed steps (default: --iters)");
  run->add_option("--seed", seed, "base seed")->capture_default_str();
  run->add_option("--trials", trials, "trials per cell")->check(CLI::PositiveNumber);
  run->add_option("--gap-every", gap_every, "FW gap stride (0 disables, -1 automatic)");
  run->add_option("--stop-gap", stop_gap, "stop once a recorded gap is below this");
  run->add_option("--hmode", hmode, "dense | factored")->capture_default_str();
  run->add_option("--return", ret, "last | best-gap | uniform-random")->capture_default_str();
  run->add_option("--eps", eps, "gap targets for the summary");
  run->add_option("--out", out, "output directory");
  run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--bound", bound, "bound to check after the run");
  run->add_option("--reference", reference, "reference solution JSON")->check(CLI::ExistingFile);

  ProblemFlags ref_pf;
  long ref_iters = 1'000'000;
  std::string ref_out;
  auto* ref = app.add_subcommand("reference", "compute a reference optimum");
  add_problem_flags(ref, ref_pf);
  ref->add_option("--iters", ref_iters, "standard FW iterations")->capture_default_str();
  ref->add_option("--out", ref_out, "output file");

  std::vector<std::string> check_inputs;
  std::string check_bound;
  std::string check_ref;
  double slack = 0.0;
  long k_max = -1;
  auto* check = app.add_subcommand("check", "check traces against a convergence bound");
  check->add_option("traces", check_inputs, "trace files or directories")->required();
  check->add_option("--bound", check_bound,
                    "convex-stochastic | convex-deterministic | nonconvex | erm-convex | "
                    "erm-nonconvex")
      ->required();
  check->add_option("--reference", check_ref, "reference solution JSON")->check(CLI::ExistingFile);
  check->add_option("--slack", slack, "multiplier on the bound (default 1 or 2)");
  check->add_option("--k-max", k_max, "ignore records beyond this iteration");

  std::vector<std::string> sum_inputs;
  std::vector<double> sum_eps;
  bool sum_json = false;
  auto* sum = app.add_subcommand("summarize", "summarize trace files");
  sum->add_option("traces", sum_inputs, "trace files or directories")->required();
  sum->add_option("--eps", sum_eps, "gap targets");
  sum->add_flag("--json", sum_json, "print JSON instead of a table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      return cmd_run(run_pf, solvers, rules, sampling, steps, iters, horizon, seed, trials,
                     gap_every, stop_gap, hmode, ret, eps, out, jobs, bound, reference);
    }
    if (*ref) return cmd_reference(ref_pf, ref_iters, ref_out);
    if (*check) return cmd_check(check_inputs, check_bound, check_ref, slack, k_max);
    if (*sum) return cmd_summarize(sum_inputs, sum_eps, sum_json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
