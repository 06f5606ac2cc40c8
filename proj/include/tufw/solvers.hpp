#pragma once

#include "tufw/geometry.hpp"
#include "tufw/rules.hpp"
#include "tufw/taylor_model.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace tufw {

/// Harmonic: 2 / (k + 2). FixedInvSqrtK: 1 / sqrt(K + 1) for a horizon K.
/// Adaptive: the base schedule capped by the minimizer of the local quadratic
/// model along the Frank-Wolfe direction.
enum class StepKind { Harmonic, FixedInvSqrtK, Adaptive };

struct StepSizeRule {
  StepKind kind = StepKind::Harmonic;
  StepKind base = StepKind::Harmonic;  // schedule under Adaptive
  std::optional<long> horizon;         // K for FixedInvSqrtK
};

StepKind parse_step_kind(std::string_view name);
std::string_view to_string(StepKind kind) noexcept;

/// gamma_k of the underlying schedule (the base schedule for Adaptive).
double schedule_step(const StepSizeRule& rule, long k);

/// Step for iteration k. For Adaptive, `gk_dot_xs` is g^T (x - s) and
/// `curvature` is (s - x)^T H (s - x); both are ignored otherwise.
double step_size(const StepSizeRule& rule, long k, double gk_dot_xs = 0.0,
                 double curvature = 0.0);

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SolverKind { Tufw, StandardFw, FwAda };
SolverKind parse_solver_kind(std::string_view name);
std::string_view to_string(SolverKind kind) noexcept;

/// Which iterate a run reports as its solution.
enum class ReturnPolicy { Last, BestGap, UniformRandom };
ReturnPolicy parse_return_policy(std::string_view name);
std::string_view to_string(ReturnPolicy policy) noexcept;

struct IterationRecord {
  long k = 0;
  double objective = 0.0;
  std::optional<double> gap;
  double gamma = 0.0;
  Index batch = 0;
  std::uint64_t flops = 0;          // cumulative algorithm flops
  std::uint64_t lmo_calls = 0;      // cumulative
  std::uint64_t metrics_flops = 0;  // cumulative, objective and gap evaluation
  double wall_ms = 0.0;             // cumulative, metrics excluded

  /// Field-wise equality ignoring wall time.
  bool same_work(const IterationRecord& other) const noexcept;
};

struct Trace {
  std::vector<IterationRecord> records;
  Vector last_iterate;  // x^{K+1}, or the iterate at early exit
  Vector solution;      // chosen by the return policy
  long solution_k = 0;
  std::uint64_t exact_gradient_flops = 0;  // cost of one exact gradient
};

/// State handed to per-iteration observers after g^k is formed and before
/// the LMO call.
struct IterationView {
  long k;
  const Vector& x;
  const Vector& g;
  std::span<const Index> batch;
  std::span<const double> steps;  // gamma_0 .. gamma_{k-1}
  TaylorModel* model;             // null for exact-gradient solvers
};

struct RunOptions {
  long iterations = 100;  // K; iterations k = 0..K are executed
  std::optional<Vector> x0;
  HessianMode hessian_mode = HessianMode::Dense;
  long gap_every = 0;  // record G(x^k) when k % gap_every == 0; 0 disables
  bool record_objective = true;
  std::optional<double> gap_tolerance;  // stop once a recorded gap is <= this
  bool keep_iterates = false;
  ReturnPolicy return_policy = ReturnPolicy::Last;
  std::uint64_t return_seed = 0;
  std::function<void(const IterationView&)> on_iteration;
};

struct RunResult {
  Trace trace;
  std::vector<Vector> iterates;  // x^0 .. x^{K+1} when keep_iterates
};

/// lmo(-e_1): a fixed vertex of the set, used when no x0 is given.
Vector default_start(const FeasibleSet& set, Index p);

/// G(x) = <x - s, grad F(x)> with s = lmo(grad F(x)). Charged to `counter`.
double fw_gap(const Problem& problem, const FeasibleSet& set, const Eigen::Ref<const Vector>& x,
              MetricsCounter* counter = nullptr);

/// Frank-Wolfe with Taylor-point updating.
RunResult tufw_run(const Problem& problem, const FeasibleSet& set, const BatchRule& rule,
                   const StepSizeRule& steps, const RunOptions& options);

/// Frank-Wolfe with an exact gradient every iteration. Adaptive steps are
/// rejected; use fw_ada_run.
RunResult standard_fw_run(const Problem& problem, const FeasibleSet& set,
                          const StepSizeRule& steps, const RunOptions& options);

/// Exact-gradient Frank-Wolfe with gamma = min{1, G(x) / (L_eff ||x - s||^2)},
/// the norm being the problem's primal norm.
RunResult fw_ada_run(const Problem& problem, const FeasibleSet& set, const RunOptions& options);

}  // namespace tufw
