#include "tufw/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>

namespace tufw {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::uint64_t u64(Index v) { return static_cast<std::uint64_t>(v); }

// Produces g^k for iteration k (updating any internal model first) and
// returns |B_k|.
using GradientSource = std::function<Index(long k, const Vector& x, Vector& g)>;
// Produces gamma_k given x^k, g^k and the LMO vertex.
using StepSource = std::function<double(long k, const Vector& x, const Vector& g, const Vertex& s)>;
using FlopSource = std::function<std::uint64_t()>;

RunResult run_loop(const Problem& problem, const FeasibleSet& set, const RunOptions& options,
                   const Vector& x0, const GradientSource& gradient, const StepSource& step,
                   const FlopSource& model_flops, TaylorModel* model,
                   const std::function<std::span<const Index>()>& last_batch) {
  if (options.iterations < 0) throw ConfigError("iteration count must be >= 0");
  if (options.return_policy == ReturnPolicy::BestGap && options.gap_every <= 0) {
    throw ConfigError("return policy best-gap needs gap recording (gap_every > 0)");
  }
  const Index p = problem.p();
  const long K = options.iterations;

  RunResult result;
  Trace& trace = result.trace;
  trace.records.reserve(static_cast<std::size_t>(K + 1));
  trace.exact_gradient_flops = exact_gradient_flops(problem);

  long random_pick = -1;
  if (options.return_policy == ReturnPolicy::UniformRandom) {
    std::mt19937_64 rng(mix_seed(options.return_seed, 0x7265747572ULL));
    random_pick = std::uniform_int_distribution<long>(0, K)(rng);
  }

  Vector x = x0;
  Vector g(p);
  std::vector<double> steps;
  steps.reserve(static_cast<std::size_t>(K + 1));
  MetricsCounter metrics;
  std::uint64_t own_flops = 0;  // LMO and iterate updates
  std::uint64_t lmo_calls = 0;
  double metrics_ms = 0.0;
  std::optional<double> best_gap;
  bool have_solution = false;
  const auto start = Clock::now();

  if (options.keep_iterates) result.iterates.push_back(x);

  for (long k = 0; k <= K; ++k) {
    const Index batch = gradient(k, x, g);
    if (!g.allFinite()) {
      throw SolverError("non-finite gradient estimate at iteration " + std::to_string(k));
    }
    if (options.on_iteration) {
      options.on_iteration(IterationView{k, x, g, last_batch(), steps, model});
    }

    const Vertex s = set.lmo_vertex(g);
    ++lmo_calls;
    own_flops += u64(p);
    const double gamma = step(k, x, g, s);

    IterationRecord rec;
    rec.k = k;
    rec.gamma = gamma;
    rec.batch = batch;
    const auto metrics_start = Clock::now();
    if (options.record_objective) {
      rec.objective = objective(problem, x, &metrics);
      if (std::isnan(rec.objective)) {
        throw SolverError("objective is NaN at iteration " + std::to_string(k));
      }
    }
    if (options.gap_every > 0 && k % options.gap_every == 0) {
      rec.gap = fw_gap(problem, set, x, &metrics);
    }
    metrics_ms += elapsed_ms(metrics_start);

    if (rec.gap && (!best_gap || *rec.gap < *best_gap) &&
        options.return_policy == ReturnPolicy::BestGap) {
      best_gap = rec.gap;
      trace.solution = x;
      trace.solution_k = k;
      have_solution = true;
    }
    if (k == random_pick) {
      trace.solution = x;
      trace.solution_k = k;
      have_solution = true;
    }

    steps.push_back(gamma);
    x *= (1.0 - gamma);
    x[s.index] += gamma * s.value;
    own_flops += u64(p) + 2;

    rec.flops = model_flops() + own_flops;
    rec.lmo_calls = lmo_calls;
    rec.metrics_flops = metrics.flops;
    rec.wall_ms = elapsed_ms(start) - metrics_ms;
    trace.records.push_back(rec);
    if (options.keep_iterates) result.iterates.push_back(x);

    if (options.gap_tolerance && rec.gap && *rec.gap <= *options.gap_tolerance) break;
  }

  trace.last_iterate = x;
  if (!have_solution) {
    trace.solution = x;
    trace.solution_k = trace.records.empty() ? 0 : trace.records.back().k + 1;
  }
  return result;
}

Vector resolve_start(const Problem& problem, const FeasibleSet& set, const RunOptions& options) {
  if (!options.x0) return default_start(set, problem.p());
  if (options.x0->size() != problem.p()) {
    throw DimensionError("x0 has dimension " + std::to_string(options.x0->size()) +
                         ", problem has p = " + std::to_string(problem.p()));
  }
  return *options.x0;
}

double primal_norm_sq(PrimalNorm norm, const Vector& x, const Vertex& s) {
  Vector d = -x;
  d[s.index] += s.value;
  const double v = norm == PrimalNorm::L1 ? d.lpNorm<1>() : d.norm();
  return v * v;
}

// g^T (x - s) for a vertex s.
double gap_along(const Vector& g, const Vector& x, const Vertex& s) {
  return g.dot(x) - g[s.index] * s.value;
}

}  // namespace

bool IterationRecord::same_work(const IterationRecord& o) const noexcept {
  return k == o.k && objective == o.objective && gap == o.gap && gamma == o.gamma &&
         batch == o.batch && flops == o.flops && lmo_calls == o.lmo_calls &&
         metrics_flops == o.metrics_flops;
}

StepKind parse_step_kind(std::string_view name) {
  if (name == "harmonic") return StepKind::Harmonic;
  if (name == "fixed") return StepKind::FixedInvSqrtK;
  if (name == "adaptive") return StepKind::Adaptive;
  throw ConfigError("unknown step rule '" + std::string(name) + "'");
}

std::string_view to_string(StepKind kind) noexcept {
  switch (kind) {
    case StepKind::Harmonic:
      return "harmonic";
    case StepKind::FixedInvSqrtK:
      return "fixed";
    case StepKind::Adaptive:
      return "adaptive";
  }
  return "?";
}

SolverKind parse_solver_kind(std::string_view name) {
  if (name == "tufw") return SolverKind::Tufw;
  if (name == "fw") return SolverKind::StandardFw;
  if (name == "fw-ada") return SolverKind::FwAda;
  throw ConfigError("unknown solver '" + std::string(name) + "'");
}

std::string_view to_string(SolverKind kind) noexcept {
  switch (kind) {
    case SolverKind::Tufw:
      return "tufw";
    case SolverKind::StandardFw:
      return "fw";
    case SolverKind::FwAda:
      return "fw-ada";
  }
  return "?";
}

ReturnPolicy parse_return_policy(std::string_view name) {
  if (name == "last") return ReturnPolicy::Last;
  if (name == "best-gap") return ReturnPolicy::BestGap;
  if (name == "uniform-random") return ReturnPolicy::UniformRandom;
  throw ConfigError("unknown return policy '" + std::string(name) + "'");
}

std::string_view to_string(ReturnPolicy policy) noexcept {
  switch (policy) {
    case ReturnPolicy::Last:
      return "last";
    case ReturnPolicy::BestGap:
      return "best-gap";
    case ReturnPolicy::UniformRandom:
      return "uniform-random";
  }
  return "?";
}

double schedule_step(const StepSizeRule& rule, long k) {
  const StepKind kind = rule.kind == StepKind::Adaptive ? rule.base : rule.kind;
  switch (kind) {
    case StepKind::Harmonic:
      return 2.0 / (static_cast<double>(k) + 2.0);
    case StepKind::FixedInvSqrtK:
      if (!rule.horizon || *rule.horizon < 0) {
        throw ConfigError("fixed step size 1/sqrt(K+1) needs a horizon K >= 0");
      }
      return 1.0 / std::sqrt(static_cast<double>(*rule.horizon) + 1.0);
    case StepKind::Adaptive:
      throw ConfigError("adaptive step size needs a non-adaptive base schedule");
  }
  return 0.0;
}

double step_size(const StepSizeRule& rule, long k, double gk_dot_xs, double curvature) {
  const double gamma = schedule_step(rule, k);
  if (rule.kind != StepKind::Adaptive || !(curvature > 0.0)) {
    return gamma;
  }
  return std::clamp(std::min(gamma, gk_dot_xs / curvature), 0.0, 1.0);
}

Vector default_start(const FeasibleSet& set, Index p) {
  if (p < 1) throw DimensionError("default_start: p must be >= 1");
  Vector direction = Vector::Zero(p);
  direction[0] = -1.0;
  return set.lmo(direction);
}

double fw_gap(const Problem& problem, const FeasibleSet& set, const Eigen::Ref<const Vector>& x,
              MetricsCounter* counter) {
  const Vector grad = exact_gradient(problem, x, counter);
  const Vertex s = set.lmo_vertex(grad);
  if (counter) counter->flops += 3 * u64(problem.p());
  return grad.dot(x) - grad[s.index] * s.value;
}

RunResult tufw_run(const Problem& problem, const FeasibleSet& set, const BatchRule& rule,
                   const StepSizeRule& steps, const RunOptions& options) {
  const Vector x0 = resolve_start(problem, set, options);
  schedule_step(steps, 0);  // validates the schedule up front
  TaylorModel model(problem, x0, options.hessian_mode);
  std::vector<Index> batch;
  const Index n = problem.n();

  auto gradient = [&](long k, const Vector& x, Vector& g) -> Index {
    Index size = n;  // B_0 = [n], built with the model
    if (k > 0) {
      batch = rule.indices(k, n);
      model.update_batch(batch, x, k);
      size = static_cast<Index>(batch.size());
    }
    model.gradient_estimate(x, g);
    return size;
  };
  auto step = [&](long k, const Vector& x, const Vector& g, const Vertex& s) {
    if (steps.kind != StepKind::Adaptive) return step_size(steps, k);
    Vector d = -x;
    d[s.index] += s.value;
    return step_size(steps, k, gap_along(g, x, s), model.curvature(d));
  };
  auto flops = [&] { return model.update_flops() + model.estimate_flops(); };
  auto last_batch = [&]() -> std::span<const Index> { return batch; };
  return run_loop(problem, set, options, x0, gradient, step, flops, &model, last_batch);
}

RunResult standard_fw_run(const Problem& problem, const FeasibleSet& set,
                          const StepSizeRule& steps, const RunOptions& options) {
  if (steps.kind == StepKind::Adaptive) {
    throw ConfigError("standard Frank-Wolfe has no quadratic model for adaptive steps; "
                      "use fw-ada");
  }
  schedule_step(steps, 0);
  const Vector x0 = resolve_start(problem, set, options);
  std::uint64_t gradient_flops = 0;
  auto gradient = [&](long, const Vector& x, Vector& g) -> Index {
    MetricsCounter c;
    g = exact_gradient(problem, x, &c);
    gradient_flops += c.flops;
    return problem.n();
  };
  auto step = [&](long k, const Vector&, const Vector&, const Vertex&) {
    return step_size(steps, k);
  };
  auto flops = [&] { return gradient_flops; };
  auto last_batch = [] { return std::span<const Index>{}; };
  return run_loop(problem, set, options, x0, gradient, step, flops, nullptr, last_batch);
}

RunResult fw_ada_run(const Problem& problem, const FeasibleSet& set, const RunOptions& options) {
  const Vector x0 = resolve_start(problem, set, options);
  std::uint64_t gradient_flops = 0;
  const double L = problem.L_eff();
  auto gradient = [&](long, const Vector& x, Vector& g) -> Index {
    MetricsCounter c;
    g = exact_gradient(problem, x, &c);
    gradient_flops += c.flops;
    return problem.n();
  };
  auto step = [&](long, const Vector& x, const Vector& g, const Vertex& s) {
    const double denom = L * primal_norm_sq(problem.primal_norm(), x, s);
    gradient_flops += 3 * u64(problem.p());
    if (!(denom > 0.0)) return 1.0;
    return std::clamp(gap_along(g, x, s) / denom, 0.0, 1.0);
  };
  auto flops = [&] { return gradient_flops; };
  auto last_batch = [] { return std::span<const Index>{}; };
  return run_loop(problem, set, options, x0, gradient, step, flops, nullptr, last_batch);
}

}  // namespace tufw
