// Acceptance suite. One line per criterion:
//
//   acceptance                 run all criteria
//   acceptance --criterion N   run one; exit 0 pass, 1 fail, 77 not run
//
// Criterion 11 reads a1a and svmguide3 from $TUFW_DATA_DIR (LIBSVM text).

#include "tufw/harness.hpp"

#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>

using namespace tufw;

namespace {

enum class Status { Pass, Fail, NotRun };

struct Outcome {
  Status status = Status::Fail;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

Outcome verdict(bool ok, std::string detail) {
  return {ok ? Status::Pass : Status::Fail, std::move(detail)};
}

Vector random_vector(Index p, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(p);
  for (auto& e : v) e = normal(rng);
  return v;
}

// (1/n) sum_i [l'(theta_i) w_i + l''(theta_i) (w_i^T x - theta_i) w_i], one
// observation at a time.
Vector taylor_sum(const Problem& prob, const Vector& theta, const Vector& x) {
  const Eigen::MatrixXd W = prob.W();
  Vector g = Vector::Zero(prob.p());
  for (Index i = 0; i < prob.n(); ++i) {
    const double y = prob.y()[i];
    const double t = theta[i];
    g += (loss_d1(prob.family(), y, t) + loss_d2(prob.family(), y, t) * (W.col(i).dot(x) - t)) *
         W.col(i);
  }
  return g / static_cast<double>(prob.n());
}

BatchRule make_rule(RuleKind kind, std::uint64_t seed = 0,
                    std::optional<long> horizon = std::nullopt) {
  return BatchRule(RuleSpec{kind, horizon, Sampling::CyclicBlock, seed});
}

TraceFile as_trace(const Trace& trace) {
  TraceFile t;
  t.header = Json{{"type", "header"}};
  t.records = trace.records;
  return t;
}

// ---------------------------------------------------------------------------

Outcome affine_model() {
  const auto prob = synth_problem(64, 8, LossKind::Logistic, 1);
  const FeasibleSet set(SetKind::L1Ball, 10.0);
  std::mt19937_64 rng(101);
  double worst = 0.0;
  long checks = 0;
  RunOptions o;
  o.iterations = 199;
  o.record_objective = false;
  o.on_iteration = [&](const IterationView& v) {
    for (int t = 0; t < 5; ++t) {
      const Vector probe = random_vector(8, rng, 3.0);
      const Vector expect = taylor_sum(prob, v.model->theta(), probe);
      const Vector got = v.model->gradient_estimate(probe);
      worst = std::max(worst, (got - expect).norm() / std::max(expect.norm(), 1e-300));
      ++checks;
    }
  };
  auto rule = BatchRule(RuleSpec{RuleKind::SbdSqrtK, std::nullopt,
                                 Sampling::UniformNoReplacement, 7});
  tufw_run(prob, set, rule, StepSizeRule{}, o);
  return verdict(checks == 1000 && worst <= 1e-9,
                 fmt("max rel err %.3e over %ld probes (tol 1e-9)", worst, checks));
}

Outcome quadratic_exactness() {
  const auto prob = synth_problem(64, 8, LossKind::Quadratic, 1);
  const FeasibleSet set(SetKind::L1Ball, 10.0);
  double worst = 0.0;
  RunOptions o;
  o.iterations = 1000;
  o.record_objective = false;
  o.keep_iterates = true;
  o.on_iteration = [&](const IterationView& v) {
    worst = std::max(worst, (v.g - exact_gradient(prob, v.x)).lpNorm<Eigen::Infinity>());
  };
  const auto empty = tufw_run(prob, set, make_rule(RuleKind::Empty), StepSizeRule{}, o);
  o.on_iteration = nullptr;
  const auto full = tufw_run(prob, set, make_rule(RuleKind::Full), StepSizeRule{}, o);
  bool identical = empty.iterates.size() == full.iterates.size();
  for (std::size_t t = 0; identical && t < empty.iterates.size(); ++t) {
    identical = empty.iterates[t] == full.iterates[t];
  }
  return verdict(worst <= 1e-10 && identical,
                 fmt("max |g - grad F|_inf %.3e (tol 1e-10), iterates bitwise %s", worst,
                     identical ? "identical" : "DIFFERENT"));
}

// Shared instance for criteria 3, 4, 5 and 7.
struct ConvexDesk {
  Problem prob = synth_problem(32, 4, LossKind::Logistic, 1);
  FeasibleSet set{SetKind::L1Ball, 1.0};
  ProblemConstants constants = compute_constants(prob, set);
  double f_star = compute_reference(prob, set, 1'000'000).f_star;
};

const ConvexDesk& desk() {
  static const ConvexDesk d;
  return d;
}

struct DeterministicRun {
  BoundReport report;
  double worst_excess = -std::numeric_limits<double>::infinity();
  long pairs = 0;
};

const DeterministicRun& deterministic_run() {
  static const DeterministicRun r = [] {
    const auto& d = desk();
    DeterministicRun out;
    std::mt19937_64 rng(303);
    const auto verts = d.set.vertices(d.prob.p());
    std::uniform_int_distribution<std::size_t> pick(0, verts.size() - 1);
    RunOptions o;
    o.iterations = 2000;
    o.on_iteration = [&](const IterationView& v) {
      const double bound = v.model->error_bound(v.steps, d.constants.D);
      const Vector err = exact_gradient(d.prob, v.x) - v.g;
      for (int t = 0; t < 100; ++t) {
        const Vertex& a = verts[pick(rng)];
        const Vertex& b = verts[pick(rng)];
        const double lhs = err[a.index] * a.value - err[b.index] * b.value;
        out.worst_excess = std::max(out.worst_excess, lhs - bound);
        ++out.pairs;
      }
    };
    const auto run = tufw_run(d.prob, d.set, make_rule(RuleKind::DbdSqrtK), StepSizeRule{}, o);
    const TraceFile t = as_trace(run.trace);
    BoundCheckOptions opts;
    opts.slack = 1.0;
    out.report = bound_check({&t}, d.constants, BoundKind::ConvexDeterministic, d.f_star, opts);
    return out;
  }();
  return r;
}

Outcome deterministic_bound() {
  const auto& d = desk();
  const auto& r = deterministic_run();
  return verdict(d.prob.M() <= 1.0 && r.report.ok() && r.report.points_checked == 2000,
                 fmt("%zu violations over %zu iterates, max lhs/rhs %.3e, M %.3f, F* %.12f",
                     r.report.violations.size(), r.report.points_checked, r.report.max_ratio,
                     d.prob.M(), r.report.f_star));
}

Outcome error_bound_check() {
  const auto& r = deterministic_run();
  return verdict(r.pairs == 2001 * 100 && r.worst_excess <= 1e-12,
                 fmt("max (err.(u-v) - bound) %.3e over %ld vertex pairs (tol 1e-12)",
                     r.worst_excess, r.pairs));
}

std::vector<TraceFile> stochastic_trials() {
  const auto& d = desk();
  std::vector<TraceFile> out;
  for (std::uint64_t t = 0; t < 10; ++t) {
    RunOptions o;
    o.iterations = 1000;
    const auto run =
        tufw_run(d.prob, d.set, make_rule(RuleKind::SbdSqrtK, mix_seed(404, t)), StepSizeRule{}, o);
    out.push_back(as_trace(run.trace));
  }
  return out;
}

Outcome stochastic_bound(BoundKind kind) {
  const auto& d = desk();
  const auto trials = stochastic_trials();
  std::vector<const TraceFile*> ptrs;
  for (const auto& t : trials) ptrs.push_back(&t);
  BoundCheckOptions opts;
  opts.slack = 2.0;
  opts.at_k = {10, 100, 1000};
  const auto report = bound_check(ptrs, d.constants, kind, d.f_star, opts);
  std::string detail = fmt("%zu violations at k in {10,100,1000}, max mean/rhs %.3e (slack 2)",
                           report.violations.size(), report.max_ratio);
  if (kind == BoundKind::ErmConvex) {
    detail += fmt(", D1 %.4f D2 %.4f Dinf %.4f", d.constants.D1, d.constants.D2, d.constants.Dinf);
  }
  return verdict(report.ok() && report.points_checked == 3, detail);
}

Outcome nonconvex_decay() {
  const auto prob = synth_problem(32, 4, LossKind::SigmoidSquared, 1);
  const FeasibleSet set(SetKind::L1Ball, 1.0);
  const auto constants = compute_constants(prob, set);
  const std::vector<long> horizons{64, 256, 1024, 4096};
  std::vector<std::vector<TraceFile>> runs;
  double best = std::numeric_limits<double>::infinity();
  for (const long K : horizons) {
    auto& cell = runs.emplace_back();
    for (std::uint64_t t = 0; t < 5; ++t) {
      RunOptions o;
      o.iterations = K;
      o.gap_every = 1;
      const StepSizeRule fixed{StepKind::FixedInvSqrtK, StepKind::Harmonic, K};
      const auto run = tufw_run(prob, set, make_rule(RuleKind::SbdFourthK, mix_seed(505, t), K),
                                fixed, o);
      for (const auto& r : run.trace.records) best = std::min(best, r.objective);
      cell.push_back(as_trace(run.trace));
    }
  }
  bool ok = true;
  double previous = std::numeric_limits<double>::infinity();
  std::string detail = "mean avg gap";
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    std::vector<const TraceFile*> ptrs;
    for (const auto& t : runs[h]) ptrs.push_back(&t);
    BoundCheckOptions opts;
    opts.slack = 2.0;
    const auto report = bound_check(ptrs, constants, BoundKind::Nonconvex, best, opts);
    double mean_gap = 0.0;
    for (const auto& t : runs[h]) {
      double s = 0.0;
      for (const auto& r : t.records) s += *r.gap;
      mean_gap += s / static_cast<double>(t.records.size());
    }
    mean_gap /= static_cast<double>(runs[h].size());
    ok = ok && report.ok() && mean_gap <= previous;
    previous = mean_gap;
    detail += fmt(" K=%ld:%.4g(%.2f of rhs)", horizons[h], mean_gap, report.max_ratio);
  }
  return verdict(ok, detail + " (monotone, slack 2)");
}

Outcome flop_dominance() {
  const auto prob = synth_problem(4096, 16, LossKind::Logistic, 1);
  const FeasibleSet set(SetKind::L1Ball, 10.0);
  const long K = 4096;
  std::vector<std::uint64_t> update;  // cumulative after B_k is applied
  RunOptions o;
  o.iterations = K;
  o.record_objective = false;
  o.on_iteration = [&](const IterationView& v) { update.push_back(v.model->update_flops()); };
  tufw_run(prob, set, make_rule(RuleKind::DbdSqrtK), StepSizeRule{}, o);
  o.on_iteration = nullptr;
  const auto fw = standard_fw_run(prob, set, StepSizeRule{}, o);
  const double fw_gradient = static_cast<double>(fw.trace.records.size()) *
                             static_cast<double>(exact_gradient_flops(prob));
  const double ratio = static_cast<double>(update.back()) / fw_gradient;
  const double late = static_cast<double>(update.back() - update[1000]) /
                      static_cast<double>(K - 1000);
  const double cap = static_cast<double>(prob.n() * prob.p() * prob.max_column_nnz()) / 10.0;
  return verdict(ratio <= 0.10 && late < cap,
                 fmt("update/FW-gradient flops %.4f (tol 0.10), mean update flops k>1000 %.0f "
                     "(cap n*p*s/10 = %.0f)",
                     ratio, late, cap));
}

Outcome adaptive_descent() {
  const auto prob = synth_problem(64, 8, LossKind::Quadratic, 1);
  const FeasibleSet set(SetKind::L1Ball, 10.0);
  RunOptions o;
  o.iterations = 1000;
  o.gap_every = 1;
  o.keep_iterates = true;
  const StepSizeRule adaptive{StepKind::Adaptive, StepKind::Harmonic};
  const auto ada = tufw_run(prob, set, make_rule(RuleKind::DbdSqrtK), adaptive, o);
  const auto plain = tufw_run(prob, set, make_rule(RuleKind::DbdSqrtK), StepSizeRule{}, o);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 1; t < ada.iterates.size(); ++t) {
    worst = std::max(worst, objective(prob, ada.iterates[t]) - objective(prob, ada.iterates[t - 1]));
  }
  const double gap_ada = fw_gap(prob, set, ada.trace.last_iterate);
  const double gap_plain = fw_gap(prob, set, plain.trace.last_iterate);
  return verdict(worst <= 1e-12 && gap_ada <= gap_plain,
                 fmt("max F(x^{k+1}) - F(x^k) %.3e (tol 1e-12), final gap %.3e vs harmonic %.3e",
                     worst, gap_ada, gap_plain));
}

Outcome lmo_equivalence() {
  std::mt19937_64 rng(1010);
  std::uniform_int_distribution<Index> dim(1, 12);
  std::uniform_real_distribution<double> radius(0.1, 5.0);
  std::normal_distribution<double> normal;
  long mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const FeasibleSet set(t % 2 == 0 ? SetKind::L1Ball : SetKind::Simplex, radius(rng));
    const Index p = dim(rng);
    Vector g(p);
    for (auto& e : g) e = normal(rng);
    if (t % 10 == 0) g[p - 1] = g[0];  // exercise ties
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < p; ++j) {
      Vector v = Vector::Zero(p);
      v[j] = set.radius();
      best = std::min(best, g.dot(v));
      if (set.kind() == SetKind::L1Ball) best = std::min(best, g.dot(-v));
    }
    if (g.dot(set.lmo(g)) != best) ++mismatches;
  }
  return verdict(mismatches == 0, fmt("%ld mismatches in 1000 gradients (exact equality)", mismatches));
}

// Flops until the first recorded gap <= eps; nullopt if never reached.
std::optional<std::uint64_t> flops_to(const Trace& trace, double eps) {
  for (const auto& r : trace.records) {
    if (r.gap && *r.gap <= eps) return r.flops;
  }
  return std::nullopt;
}

Outcome real_data() {
  const char* env = std::getenv("TUFW_DATA_DIR");
  const std::filesystem::path dir = env && *env ? env : "tests/data";
  const auto a1a_path = dir / "a1a";
  const auto guide_path = dir / "svmguide3";
  if (!std::filesystem::exists(a1a_path) || !std::filesystem::exists(guide_path)) {
    return {Status::NotRun, "a1a / svmguide3 not found in " + dir.string()};
  }
  const Problem a1a(load_libsvm(a1a_path.string(), Index{123}), LossKind::Logistic);
  const Problem guide(load_libsvm(guide_path.string(), Index{22}), LossKind::Logistic);
  const bool shapes = a1a.n() == 1605 && a1a.p() == 123 && guide.n() == 1243 && guide.p() == 22;

  const FeasibleSet set(SetKind::L1Ball, 10.0);
  RunOptions o;
  o.iterations = 5000;
  o.gap_every = 1;
  o.record_objective = false;
  o.gap_tolerance = 1e-1;
  const StepSizeRule adaptive{StepKind::Adaptive, StepKind::Harmonic};
  const auto tufw = tufw_run(a1a, set, make_rule(RuleKind::DbdSqrtK), adaptive, o);
  o.iterations = 1'000'000;
  const auto fw = standard_fw_run(a1a, set, StepSizeRule{}, o);
  const auto t_flops = flops_to(tufw.trace, 1e-1);
  const auto f_flops = flops_to(fw.trace, 1e-1);
  const double unit = static_cast<double>(exact_gradient_flops(a1a));
  const double t_eq = t_flops ? static_cast<double>(*t_flops) / unit : NAN;
  const double f_eq = f_flops ? static_cast<double>(*f_flops) / unit : NAN;
  return verdict(shapes && t_flops && f_flops && t_eq < f_eq,
                 fmt("shapes %s; gap<=0.1 after %.1f (TUFW) vs %.1f (FW) exact-gradient "
                     "equivalents",
                     shapes ? "ok" : "WRONG", t_eq, f_eq));
}

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "affine-model equivalence", 10.0, affine_model},
      {2, "quadratic exactness", 5.0, quadratic_exactness},
      {3, "deterministic convex bound", 60.0, deterministic_bound},
      {4, "stochastic convex bound", 120.0, [] { return stochastic_bound(BoundKind::ConvexStochastic); }},
      {5, "ERM sharpened bound", 120.0, [] { return stochastic_bound(BoundKind::ErmConvex); }},
      {6, "nonconvex decay", 600.0, nonconvex_decay},
      {7, "Taylor error bound", 60.0, error_bound_check},
      {8, "flop-count dominance", 60.0, flop_dominance},
      {9, "adaptive descent", 5.0, adaptive_descent},
      {10, "LMO oracle equivalence", 1.0, lmo_equivalence},
      {11, "real-data smoke", 300.0, real_data},
  };
  return all;
}

Status run_one(const Criterion& c) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = c.run();
  } catch (const std::exception& e) {
    out = {Status::Fail, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (out.status == Status::Pass && secs >= c.limit_s) {
    out.status = Status::Fail;
    out.detail += " [too slow]";
  }
  const char* tag = out.status == Status::Pass ? "PASS" : out.status == Status::Fail ? "FAIL" : "NOT RUN";
  std::printf("[%s] C%-2d %-28s %s | %.2fs (limit %.0fs)\n", tag, c.id, c.name, out.detail.c_str(),
              secs, c.limit_s);
  std::fflush(stdout);
  return out.status;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }
  bool failed = false;
  bool skipped = false;
  bool found = false;
  for (const auto& c : criteria()) {
    if (only != 0 && c.id != only) continue;
    found = true;
    const Status s = run_one(c);
    failed = failed || s == Status::Fail;
    skipped = skipped || s == Status::NotRun;
  }
  if (!found) {
    std::fprintf(stderr, "unknown criterion %d\n", only);
    return 2;
  }
  if (failed) return 1;
  return only != 0 && skipped ? 77 : 0;
}
