#include "tufw/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace tufw {
namespace {

std::string cell_name(SolverKind solver, std::optional<RuleKind> rule, const StepSizeRule& steps) {
  std::string name(to_string(solver));
  if (rule) name += "/" + std::string(to_string(*rule));
  if (solver != SolverKind::FwAda) {
    name += "/" + std::string(to_string(steps.kind));
    if (steps.kind == StepKind::Adaptive) name += "-" + std::string(to_string(steps.base));
  }
  return name;
}

std::string file_stem(std::string cell, int trial) {
  std::replace(cell.begin(), cell.end(), '/', '_');
  return cell + "_t" + std::to_string(trial);
}

std::uint64_t parse_hex(const std::string& s) { return std::stoull(s, nullptr, 16); }

}  // namespace

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

// ---------------------------------------------------------------------------

ProblemConstants compute_constants(const Problem& problem, const FeasibleSet& set) {
  ProblemConstants c;
  c.n = problem.n();
  c.p = problem.p();
  c.M = problem.M();
  const auto uni = problem.univariate_constants();
  c.L = uni.L;
  c.L_hat = uni.L_hat;
  c.L_eff = problem.L_eff();
  c.Lhat_eff = problem.Lhat_eff();
  c.D = set.diameter(as_norm(problem.primal_norm()), problem.p());
  c.D1 = set.range_diameter(problem.W(), Norm::L1);
  c.D2 = set.range_diameter(problem.W(), Norm::L2);
  c.Dinf = set.range_diameter(problem.W(), Norm::Linf);
  c.exact_gradient_flops = exact_gradient_flops(problem);
  c.fingerprint = problem.fingerprint();
  c.family = problem.family();
  return c;
}

Json to_json(const ProblemConstants& c) {
  return Json{{"n", c.n},
              {"p", c.p},
              {"family", std::string(to_string(c.family))},
              {"M", c.M},
              {"L", c.L},
              {"L_hat", c.L_hat},
              {"L_eff", c.L_eff},
              {"Lhat_eff", c.Lhat_eff},
              {"D", c.D},
              {"D1", c.D1},
              {"D2", c.D2},
              {"Dinf", c.Dinf},
              {"exact_gradient_flops", c.exact_gradient_flops},
              {"fingerprint", fingerprint_hex(c.fingerprint)}};
}

ProblemConstants constants_from_json(const Json& j) {
  ProblemConstants c;
  c.n = j.at("n").get<Index>();
  c.p = j.at("p").get<Index>();
  c.family = parse_loss_kind(j.at("family").get<std::string>());
  c.M = j.at("M").get<double>();
  c.L = j.at("L").get<double>();
  c.L_hat = j.at("L_hat").get<double>();
  c.L_eff = j.at("L_eff").get<double>();
  c.Lhat_eff = j.at("Lhat_eff").get<double>();
  c.D = j.at("D").get<double>();
  c.D1 = j.at("D1").get<double>();
  c.D2 = j.at("D2").get<double>();
  c.Dinf = j.at("Dinf").get<double>();
  c.exact_gradient_flops = j.at("exact_gradient_flops").get<std::uint64_t>();
  c.fingerprint = parse_hex(j.at("fingerprint").get<std::string>());
  return c;
}

// ---------------------------------------------------------------------------

Json to_json(const IterationRecord& r) {
  Json j;
  j["k"] = r.k;
  j["F"] = r.objective;
  j["gap"] = r.gap ? Json(*r.gap) : Json(nullptr);
  j["gamma"] = r.gamma;
  j["batch"] = r.batch;
  j["flops"] = r.flops;
  j["lmo_calls"] = r.lmo_calls;
  j["metrics_flops"] = r.metrics_flops;
  j["wall_ms"] = r.wall_ms;
  return j;
}

IterationRecord record_from_json(const Json& j) {
  IterationRecord r;
  r.k = j.at("k").get<long>();
  r.objective = j.at("F").get<double>();
  if (!j.at("gap").is_null()) r.gap = j.at("gap").get<double>();
  r.gamma = j.at("gamma").get<double>();
  r.batch = j.at("batch").get<Index>();
  r.flops = j.at("flops").get<std::uint64_t>();
  r.lmo_calls = j.at("lmo_calls").get<std::uint64_t>();
  r.metrics_flops = j.at("metrics_flops").get<std::uint64_t>();
  r.wall_ms = j.at("wall_ms").get<double>();
  return r;
}

void write_trace(std::ostream& out, const TraceFile& trace) {
  out << trace.header.dump() << '\n';
  for (const auto& r : trace.records) out << to_json(r).dump() << '\n';
}

TraceFile read_trace(std::istream& in) {
  TraceFile trace;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON in trace: ") + e.what());
    }
    if (!have_header) {
      if (!j.contains("type") || j["type"] != "header") {
        throw ParseError(line_no, "trace must start with a header record");
      }
      trace.header = std::move(j);
      have_header = true;
      continue;
    }
    trace.records.push_back(record_from_json(j));
  }
  if (!have_header) throw ParseError(line_no, "empty trace file");
  return trace;
}

void save_trace(const std::filesystem::path& path, const TraceFile& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace '" + path.string() + "'");
  write_trace(out, trace);
}

TraceFile load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read trace '" + path.string() + "'");
  return read_trace(in);
}

// ---------------------------------------------------------------------------

ReferenceSolution compute_reference(const Problem& problem, const FeasibleSet& set,
                                    long iterations, std::optional<Vector> x0) {
  if (!is_convex(problem.family())) {
    throw ConfigError("reference solutions are only defined for convex loss families");
  }
  if (iterations < 1) throw ConfigError("reference run needs at least one iteration");
  const auto& W = problem.W();
  const auto& y = problem.y();
  const Index n = problem.n();
  const double inv_n = 1.0 / static_cast<double>(n);

  Vector x = x0 ? *x0 : default_start(set, problem.p());
  if (x.size() != problem.p()) throw DimensionError("reference x0 dimension mismatch");
  Vector margins(n);
  Vector weights(n);
  ReferenceSolution ref;
  ref.fingerprint = problem.fingerprint();
  ref.f_star = std::numeric_limits<double>::infinity();
  ref.iterations = iterations;
  ref.provenance = "fw/harmonic";

  for (long k = 0; k <= iterations; ++k) {
    margins.noalias() = W.transpose() * x;
    double f = 0.0;
    for (Index i = 0; i < n; ++i) {
      f += detail::value_unchecked(problem.family(), y[i], margins[i]);
    }
    f *= inv_n;
    if (f < ref.f_star) {
      ref.f_star = f;
      ref.x_star = x;
    }
    if (k == iterations) break;
    for (Index i = 0; i < n; ++i) {
      weights[i] = detail::d1_unchecked(problem.family(), y[i], margins[i]) * inv_n;
    }
    const Vector g = W * weights;
    const Vertex s = set.lmo_vertex(g);
    const double gamma = 2.0 / (static_cast<double>(k) + 2.0);
    x *= (1.0 - gamma);
    x[s.index] += gamma * s.value;
  }
  return ref;
}

Json to_json(const ReferenceSolution& ref) {
  return Json{{"fingerprint", fingerprint_hex(ref.fingerprint)},
              {"f_star", ref.f_star},
              {"x_star", std::vector<double>(ref.x_star.begin(), ref.x_star.end())},
              {"iterations", ref.iterations},
              {"provenance", ref.provenance}};
}

ReferenceSolution reference_from_json(const Json& j) {
  ReferenceSolution ref;
  ref.fingerprint = parse_hex(j.at("fingerprint").get<std::string>());
  ref.f_star = j.at("f_star").get<double>();
  const auto xs = j.at("x_star").get<std::vector<double>>();
  ref.x_star = Eigen::Map<const Vector>(xs.data(), static_cast<Index>(xs.size()));
  ref.iterations = j.at("iterations").get<long>();
  ref.provenance = j.at("provenance").get<std::string>();
  return ref;
}

void save_reference(const std::filesystem::path& path, const ReferenceSolution& ref) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write reference '" + path.string() + "'");
  out << to_json(ref).dump(2) << '\n';
}

ReferenceSolution load_reference(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read reference '" + path.string() + "'");
  return reference_from_json(Json::parse(in));
}

// ---------------------------------------------------------------------------

BoundKind parse_bound_kind(std::string_view name) {
  if (name == "convex-stochastic") return BoundKind::ConvexStochastic;
  if (name == "convex-deterministic") return BoundKind::ConvexDeterministic;
  if (name == "nonconvex") return BoundKind::Nonconvex;
  if (name == "erm-convex") return BoundKind::ErmConvex;
  if (name == "erm-nonconvex") return BoundKind::ErmNonconvex;
  throw ConfigError("unknown bound '" + std::string(name) + "'");
}

std::string_view to_string(BoundKind kind) noexcept {
  switch (kind) {
    case BoundKind::ConvexStochastic:
      return "convex-stochastic";
    case BoundKind::ConvexDeterministic:
      return "convex-deterministic";
    case BoundKind::Nonconvex:
      return "nonconvex";
    case BoundKind::ErmConvex:
      return "erm-convex";
    case BoundKind::ErmNonconvex:
      return "erm-nonconvex";
  }
  return "?";
}

bool is_stochastic_bound(BoundKind kind) noexcept { return kind != BoundKind::ConvexDeterministic; }

bool is_convex_bound(BoundKind kind) noexcept {
  return kind == BoundKind::ConvexStochastic || kind == BoundKind::ConvexDeterministic ||
         kind == BoundKind::ErmConvex;
}

double bound_rhs(BoundKind kind, const ProblemConstants& c, long k, double initial_gap) {
  const double k1 = static_cast<double>(k) + 1.0;
  const double n = static_cast<double>(c.n);
  switch (kind) {
    case BoundKind::ConvexStochastic:
      return (2.0 * c.L_eff * c.D * c.D + 134.0 * c.Lhat_eff * c.D * c.D * c.D) / k1;
    case BoundKind::ConvexDeterministic:
      return (2.0 * c.L_eff * c.D * c.D + 144.0 * c.Lhat_eff * c.D * c.D * c.D) / k1;
    case BoundKind::ErmConvex:
      return (2.0 * c.L * c.D2 * c.D2 + 134.0 * c.L_hat * c.D1 * c.Dinf * c.Dinf) / (n * k1);
    case BoundKind::Nonconvex:
      return initial_gap / std::sqrt(k1) +
             (3.0 * c.Lhat_eff * c.D * c.D * c.D + c.L_eff * c.D * c.D) / (2.0 * std::sqrt(k1));
    case BoundKind::ErmNonconvex:
      return initial_gap / std::sqrt(k1) +
             (3.0 * c.L_hat * c.D1 * c.Dinf * c.Dinf + c.L * c.D2 * c.D2) /
                 (2.0 * n * std::sqrt(k1));
  }
  return 0.0;
}

Json to_json(const BoundReport& r) {
  Json violations = Json::array();
  for (const auto& v : r.violations) {
    violations.push_back(Json{{"k", v.k}, {"lhs", v.lhs}, {"rhs", v.rhs}});
  }
  return Json{{"bound", std::string(to_string(r.kind))},
              {"slack", r.slack},
              {"f_star", r.f_star},
              {"reference_adjusted", r.reference_adjusted},
              {"points_checked", r.points_checked},
              {"max_ratio", r.max_ratio},
              {"ok", r.ok()},
              {"violations", violations}};
}

BoundReport bound_check(const std::vector<const TraceFile*>& trials,
                        const ProblemConstants& constants, BoundKind kind,
                        std::optional<double> f_star, const BoundCheckOptions& options) {
  if (trials.empty()) throw ConfigError("bound_check needs at least one trace");
  BoundReport report;
  report.kind = kind;
  report.slack = options.slack.value_or(is_stochastic_bound(kind) ? 2.0 : 1.0);

  auto in_range = [&](long k) { return options.k_max < 0 || k <= options.k_max; };
  double observed_min = std::numeric_limits<double>::infinity();
  for (const auto* t : trials) {
    for (const auto& r : t->records) {
      if (in_range(r.k)) observed_min = std::min(observed_min, r.objective);
    }
  }
  if (is_convex_bound(kind)) {
    if (!f_star) throw ConfigError("convex bound checks need a reference F*");
    report.f_star = *f_star;
    if (observed_min < *f_star) {
      report.reference_adjusted = *f_star - observed_min > 1e-9;
      report.f_star = observed_min;
    }
  } else {
    report.f_star = f_star ? std::min(*f_star, observed_min) : observed_min;
  }

  auto check = [&](long k, double lhs, double rhs) {
    ++report.points_checked;
    if (rhs > 0.0) report.max_ratio = std::max(report.max_ratio, lhs / rhs);
    if (lhs > rhs) report.violations.push_back({k, lhs, rhs});
  };
  auto wanted = [&](long k) {
    if (k < 1 || !in_range(k)) return false;
    return options.at_k.empty() ||
           std::find(options.at_k.begin(), options.at_k.end(), k) != options.at_k.end();
  };

  if (kind == BoundKind::ConvexDeterministic) {
    for (const auto* t : trials) {
      for (const auto& r : t->records) {
        if (!wanted(r.k)) continue;
        check(r.k, r.objective - report.f_star,
              report.slack * bound_rhs(kind, constants, r.k));
      }
    }
    return report;
  }

  if (is_convex_bound(kind)) {
    std::map<long, std::pair<double, std::size_t>> sums;
    for (const auto* t : trials) {
      for (const auto& r : t->records) {
        if (!wanted(r.k)) continue;
        auto& [sum, count] = sums[r.k];
        sum += r.objective - report.f_star;
        ++count;
      }
    }
    for (const auto& [k, entry] : sums) {
      if (entry.second != trials.size()) continue;
      check(k, entry.first / static_cast<double>(entry.second),
            report.slack * bound_rhs(kind, constants, k));
    }
    return report;
  }

  // Nonconvex: trial mean of the per-trial average gap over k = 0..K.
  double mean_avg_gap = 0.0;
  double mean_initial = 0.0;
  long horizon = -1;
  for (const auto* t : trials) {
    double sum = 0.0;
    std::size_t count = 0;
    long last_k = -1;
    for (const auto& r : t->records) {
      if (!in_range(r.k)) continue;
      if (!r.gap) continue;
      sum += *r.gap;
      ++count;
      last_k = std::max(last_k, r.k);
    }
    if (count == 0 || t->records.empty()) {
      throw ConfigError("nonconvex bound checks need recorded FW gaps");
    }
    if (horizon >= 0 && horizon != last_k) {
      throw ConfigError("nonconvex bound check: trials have different horizons");
    }
    horizon = last_k;
    mean_avg_gap += sum / static_cast<double>(count);
    mean_initial += t->records.front().objective - report.f_star;
  }
  const auto trials_d = static_cast<double>(trials.size());
  mean_avg_gap /= trials_d;
  mean_initial /= trials_d;
  check(horizon, mean_avg_gap, report.slack * bound_rhs(kind, constants, horizon, mean_initial));
  return report;
}

// ---------------------------------------------------------------------------

namespace {

struct TargetStats {
  std::size_t hits = 0;
  double k = 0.0;
  double flops = 0.0;
  double lmo = 0.0;
  double wall_ms = 0.0;
};

struct CellStats {
  std::size_t trials = 0;
  std::vector<TargetStats> targets;
  double final_objective = 0.0;
  double final_flops = 0.0;
  std::uint64_t gradient_flops = 0;
};

std::map<std::string, CellStats> collect(const std::vector<TraceFile>& traces,
                                         const std::vector<double>& eps_targets) {
  std::map<std::string, CellStats> cells;
  for (const auto& t : traces) {
    const std::string cell = t.header.value("cell", std::string("?"));
    auto& stats = cells[cell];
    stats.targets.resize(eps_targets.size());
    ++stats.trials;
    if (t.header.contains("constants")) {
      stats.gradient_flops = t.header["constants"].value("exact_gradient_flops", std::uint64_t{0});
    }
    if (!t.records.empty()) {
      stats.final_objective += t.records.back().objective;
      stats.final_flops += static_cast<double>(t.records.back().flops);
    }
    for (std::size_t e = 0; e < eps_targets.size(); ++e) {
      for (const auto& r : t.records) {
        if (r.gap && *r.gap <= eps_targets[e]) {
          auto& ts = stats.targets[e];
          ++ts.hits;
          ts.k += static_cast<double>(r.k);
          ts.flops += static_cast<double>(r.flops);
          ts.lmo += static_cast<double>(r.lmo_calls);
          ts.wall_ms += r.wall_ms;
          break;
        }
      }
    }
  }
  return cells;
}

Json mean_or_null(double sum, std::size_t count) {
  return count == 0 ? Json(nullptr) : Json(sum / static_cast<double>(count));
}

}  // namespace

Json summarize(const std::vector<TraceFile>& traces, const std::vector<double>& eps_targets) {
  const auto cells = collect(traces, eps_targets);
  Json out;
  out["eps_targets"] = eps_targets;
  Json cell_list = Json::array();
  for (const auto& [name, stats] : cells) {
    Json targets = Json::array();
    for (std::size_t e = 0; e < eps_targets.size(); ++e) {
      const auto& ts = stats.targets[e];
      Json grad_equiv = nullptr;
      if (ts.hits > 0 && stats.gradient_flops > 0) {
        grad_equiv = ts.flops / static_cast<double>(ts.hits) /
                     static_cast<double>(stats.gradient_flops);
      }
      targets.push_back(Json{{"eps", eps_targets[e]},
                             {"trials_reached", ts.hits},
                             {"mean_first_k", mean_or_null(ts.k, ts.hits)},
                             {"mean_flops", mean_or_null(ts.flops, ts.hits)},
                             {"mean_exact_gradient_equivalents", grad_equiv},
                             {"mean_lmo_calls", mean_or_null(ts.lmo, ts.hits)}});
    }
    cell_list.push_back(Json{{"cell", name},
                             {"trials", stats.trials},
                             {"mean_final_objective", mean_or_null(stats.final_objective, stats.trials)},
                             {"mean_final_flops", mean_or_null(stats.final_flops, stats.trials)},
                             {"targets", targets}});
  }
  out["cells"] = cell_list;
  return out;
}

Json summarize_times(const std::vector<TraceFile>& traces, const std::vector<double>& eps_targets) {
  const auto cells = collect(traces, eps_targets);
  Json out;
  out["eps_targets"] = eps_targets;
  Json cell_list = Json::array();
  for (const auto& [name, stats] : cells) {
    Json times = Json::array();
    for (const auto& ts : stats.targets) times.push_back(mean_or_null(ts.wall_ms, ts.hits));
    cell_list.push_back(Json{{"cell", name}, {"mean_wall_ms", times}});
  }
  out["cells"] = cell_list;
  return out;
}

std::string format_summary_table(const Json& summary) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-28s %10s %8s %12s %14s %12s\n", "cell", "eps", "reached",
                "first_k", "flops", "grad_equiv");
  out << line;
  for (const auto& cell : summary.at("cells")) {
    for (const auto& t : cell.at("targets")) {
      auto num = [](const Json& j) { return j.is_null() ? std::string("-") : [&] {
        char b[32];
        std::snprintf(b, sizeof(b), "%.4g", j.get<double>());
        return std::string(b);
      }(); };
      std::snprintf(line, sizeof(line), "%-28s %10.1e %4zu/%-3zu %12s %14s %12s\n",
                    cell.at("cell").get<std::string>().c_str(), t.at("eps").get<double>(),
                    t.at("trials_reached").get<std::size_t>(), cell.at("trials").get<std::size_t>(),
                    num(t.at("mean_first_k")).c_str(), num(t.at("mean_flops")).c_str(),
                    num(t.at("mean_exact_gradient_equivalents")).c_str());
      out << line;
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------

Json to_json(const ExperimentConfig& c) {
  Json j;
  if (c.data_path) j["data"] = *c.data_path;
  if (c.synth) j["synth"] = Json{{"n", c.synth->n}, {"p", c.synth->p}, {"seed", c.synth->seed}};
  if (c.dims) j["dims"] = *c.dims;
  j["loss"] = std::string(to_string(c.loss));
  j["norm"] = std::string(to_string(c.norm));
  j["set"] = std::string(to_string(c.set));
  j["lambda"] = c.lambda;
  Json solvers = Json::array();
  for (auto s : c.solvers) solvers.push_back(std::string(to_string(s)));
  j["solvers"] = solvers;
  Json rules = Json::array();
  for (auto r : c.rules) rules.push_back(std::string(to_string(r)));
  j["rules"] = rules;
  j["sampling"] = std::string(to_string(c.sampling));
  j["steps"] = std::string(to_string(c.steps.kind));
  j["steps_base"] = std::string(to_string(c.steps.base));
  j["iterations"] = c.iterations;
  j["horizon"] = c.horizon ? Json(*c.horizon) : Json(nullptr);
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["gap_every"] = c.gap_every;
  j["stop_gap"] = c.stop_gap ? Json(*c.stop_gap) : Json(nullptr);
  j["hmode"] = std::string(to_string(c.hessian_mode));
  j["return"] = std::string(to_string(c.return_policy));
  j["eps_targets"] = c.eps_targets;
  return j;
}

Problem load_problem(const ExperimentConfig& config) {
  if (config.data_path && config.synth) {
    throw ConfigError("give either a data file or a synthetic spec, not both");
  }
  if (config.data_path) {
    return Problem(load_libsvm(*config.data_path, config.dims), config.loss, config.norm);
  }
  if (config.synth) {
    return synth_problem(config.synth->n, config.synth->p, config.loss, config.synth->seed,
                         config.norm);
  }
  throw ConfigError("no problem source: give a data file or a synthetic spec");
}

long effective_gap_every(const ExperimentConfig& config, Index n) {
  if (config.gap_every >= 0) return config.gap_every;
  if (!is_convex(config.loss) && config.iterations >= 100 * static_cast<long>(n)) return 200;
  return 1;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.trials < 1) throw ConfigError("trials must be >= 1");
  if (config.out_dir.empty()) throw ConfigError("no output directory");
  std::filesystem::create_directories(config.out_dir);

  const Problem problem = load_problem(config);
  const FeasibleSet set(config.set, config.lambda);
  const ProblemConstants constants = compute_constants(problem, set);
  const long gap_every = effective_gap_every(config, problem.n());
  const long horizon = config.horizon.value_or(config.iterations);

  std::optional<ReferenceSolution> reference;
  if (config.reference_path) {
    reference = load_reference(*config.reference_path);
    if (reference->fingerprint != problem.fingerprint()) {
      throw ConfigError("reference solution was computed for a different problem");
    }
  }

  struct Task {
    SolverKind solver;
    std::optional<RuleKind> rule;
    int trial;
  };
  std::vector<Task> tasks;
  for (const auto solver : config.solvers) {
    for (int t = 0; t < config.trials; ++t) {
      if (solver == SolverKind::Tufw) {
        for (const auto rule : config.rules) tasks.push_back({solver, rule, t});
      } else {
        tasks.push_back({solver, std::nullopt, t});
      }
    }
  }
  std::sort(tasks.begin(), tasks.end(), [](const Task& a, const Task& b) {
    if (a.solver != b.solver) return a.solver < b.solver;
    if (a.rule != b.rule) return a.rule < b.rule;
    return a.trial < b.trial;
  });

  std::vector<std::optional<TraceFile>> traces(tasks.size());
  std::vector<std::filesystem::path> paths(tasks.size());
  std::vector<std::optional<FailedCell>> failures(tasks.size());

  auto run_task = [&](std::size_t idx) {
    const Task& task = tasks[idx];
    StepSizeRule steps = config.steps;
    if (config.steps.horizon == std::nullopt) steps.horizon = horizon;
    if (task.solver == SolverKind::StandardFw && steps.kind == StepKind::Adaptive) {
      steps.kind = steps.base;
    }
    const std::string cell = cell_name(task.solver, task.rule, steps);
    const std::uint64_t trial_seed = mix_seed(config.seed, static_cast<std::uint64_t>(task.trial));
    try {
      RunOptions options;
      options.iterations = config.iterations;
      options.hessian_mode = config.hessian_mode;
      options.gap_every = gap_every;
      options.gap_tolerance = config.stop_gap;
      options.return_policy = config.return_policy;
      options.return_seed = trial_seed;

      RunResult run;
      switch (task.solver) {
        case SolverKind::Tufw: {
          RuleSpec spec{*task.rule, horizon, config.sampling, trial_seed};
          run = tufw_run(problem, set, BatchRule(spec), steps, options);
          break;
        }
        case SolverKind::StandardFw:
          run = standard_fw_run(problem, set, steps, options);
          break;
        case SolverKind::FwAda:
          run = fw_ada_run(problem, set, options);
          break;
      }
      TraceFile trace;
      trace.header = Json{{"type", "header"},
                          {"version", kVersion},
                          {"cell", cell},
                          {"solver", std::string(to_string(task.solver))},
                          {"rule", task.rule ? Json(std::string(to_string(*task.rule)))
                                             : Json(nullptr)},
                          {"steps", std::string(to_string(steps.kind))},
                          {"trial", task.trial},
                          {"trial_seed", trial_seed},
                          {"gap_every", gap_every},
                          {"solution_k", run.trace.solution_k},
                          {"config", to_json(config)},
                          {"constants", to_json(constants)}};
      trace.records = std::move(run.trace.records);
      paths[idx] = config.out_dir / (file_stem(cell, task.trial) + ".jsonl");
      save_trace(paths[idx], trace);
      traces[idx] = std::move(trace);
    } catch (const std::exception& e) {
      failures[idx] = FailedCell{cell, task.trial, e.what()};
    }
  };

  const int jobs = std::max(1, std::min<int>(config.jobs, static_cast<int>(tasks.size())));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) run_task(i);
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  ExperimentResult result;
  std::vector<TraceFile> finished;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (failures[i]) result.failed.push_back(*failures[i]);
    if (traces[i]) {
      result.traces.push_back(paths[i]);
      finished.push_back(*traces[i]);
    }
  }

  Json summary = summarize(finished, config.eps_targets);
  Json failed = Json::array();
  for (const auto& f : result.failed) {
    failed.push_back(Json{{"cell", f.cell}, {"trial", f.trial}, {"error", f.error}});
  }
  summary["failed_cells"] = failed;

  if (config.bound) {
    std::map<std::string, std::vector<const TraceFile*>> by_cell;
    for (const auto& t : finished) by_cell[t.header["cell"].get<std::string>()].push_back(&t);
    Json bounds = Json::array();
    for (const auto& [cell, group] : by_cell) {
      std::optional<double> f_star;
      if (reference) f_star = reference->f_star;
      Json entry{{"cell", cell}};
      try {
        const BoundReport report = bound_check(group, constants, *config.bound, f_star);
        result.bound_violations += report.violations.size();
        entry["report"] = to_json(report);
      } catch (const std::exception& e) {
        entry["error"] = e.what();
        result.failed.push_back(FailedCell{cell, -1, e.what()});
      }
      bounds.push_back(entry);
    }
    summary["bounds"] = bounds;
  }

  result.summary = config.out_dir / "summary.json";
  std::ofstream(result.summary) << summary.dump(2) << '\n';
  std::ofstream(config.out_dir / "summary_times.json")
      << summarize_times(finished, config.eps_targets).dump(2) << '\n';
  return result;
}

}  // namespace tufw
