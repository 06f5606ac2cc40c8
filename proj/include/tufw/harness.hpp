#pragma once

#include "tufw/dataset.hpp"
#include "tufw/geometry.hpp"
#include "tufw/rules.hpp"
#include "tufw/solvers.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tufw {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Problem-level constants

/// Everything the bound checks need, stored in every trace header.
struct ProblemConstants {
  Index n = 0;
  Index p = 0;
  double M = 0.0;
  double L = 0.0;      // univariate
  double L_hat = 0.0;  // univariate
  double L_eff = 0.0;
  double Lhat_eff = 0.0;
  double D = 0.0;  // diameter in the primal norm
  double D1 = 0.0;
  double D2 = 0.0;
  double Dinf = 0.0;
  std::uint64_t exact_gradient_flops = 0;
  std::uint64_t fingerprint = 0;
  LossKind family = LossKind::Logistic;
};

ProblemConstants compute_constants(const Problem& problem, const FeasibleSet& set);
Json to_json(const ProblemConstants& c);
ProblemConstants constants_from_json(const Json& j);

std::string fingerprint_hex(std::uint64_t fp);

// ---------------------------------------------------------------------------
// Trace files: one JSON header line, then one JSON record per iteration.

struct TraceFile {
  Json header;
  std::vector<IterationRecord> records;
};

Json to_json(const IterationRecord& r);
IterationRecord record_from_json(const Json& j);

void write_trace(std::ostream& out, const TraceFile& trace);
TraceFile read_trace(std::istream& in);
void save_trace(const std::filesystem::path& path, const TraceFile& trace);
TraceFile load_trace(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reference solutions

struct ReferenceSolution {
  std::uint64_t fingerprint = 0;
  double f_star = 0.0;
  Vector x_star;
  long iterations = 0;
  std::string provenance;
};

/// Long standard Frank-Wolfe run with harmonic steps; F* is the smallest
/// objective seen. Refuses nonconvex families.
ReferenceSolution compute_reference(const Problem& problem, const FeasibleSet& set,
                                    long iterations = 1'000'000,
                                    std::optional<Vector> x0 = std::nullopt);

Json to_json(const ReferenceSolution& ref);
ReferenceSolution reference_from_json(const Json& j);
void save_reference(const std::filesystem::path& path, const ReferenceSolution& ref);
ReferenceSolution load_reference(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Bound checks

/// Which convergence guarantee to test a trace (or a set of trials) against.
///   ConvexStochastic      E[F(x^k) - F*] <= (2 L D^2 + 134 Lhat D^3) / (k + 1)
///   ConvexDeterministic   F(x^k) - F*    <= (2 L D^2 + 144 Lhat D^3) / (k + 1)
///   Nonconvex             mean_k G(x^k)  <= (F(x^0) - F*) / sqrt(K + 1)
///                                           + (3 Lhat D^3 + L D^2) / (2 sqrt(K + 1))
///   ErmConvex             E[F(x^k) - F*] <= (2 L D2^2 + 134 Lhat D1 Dinf^2) / (n (k + 1))
///   ErmNonconvex          mean_k G(x^k)  <= (F(x^0) - F*) / sqrt(K + 1)
///                                           + (3 Lhat D1 Dinf^2 + L D2^2) / (2 n sqrt(K + 1))
/// The first three use (L_eff, Lhat_eff, D); the Erm forms use the univariate
/// (L, L_hat) and range diameters.
enum class BoundKind { ConvexStochastic, ConvexDeterministic, Nonconvex, ErmConvex, ErmNonconvex };

BoundKind parse_bound_kind(std::string_view name);
std::string_view to_string(BoundKind kind) noexcept;
bool is_stochastic_bound(BoundKind kind) noexcept;
bool is_convex_bound(BoundKind kind) noexcept;

/// Right-hand side at iteration k (convex kinds) or horizon K (nonconvex
/// kinds, which also need the F(x^0) - F* term).
double bound_rhs(BoundKind kind, const ProblemConstants& c, long k, double initial_gap = 0.0);

struct BoundCheckOptions {
  /// Multiplier on the right-hand side. Defaults: 1 for deterministic kinds,
  /// 2 for trial-mean (expectation surrogate) kinds.
  std::optional<double> slack;
  /// Restrict convex checks to these iterations; all k >= 1 otherwise.
  std::vector<long> at_k;
  long k_max = -1;  // ignore records beyond this iteration (-1: no limit)
};

struct BoundViolation {
  long k;
  double lhs;
  double rhs;
};

struct BoundReport {
  BoundKind kind = BoundKind::ConvexDeterministic;
  double slack = 1.0;
  double f_star = 0.0;
  bool reference_adjusted = false;  // F* lowered to an observed objective
  std::size_t points_checked = 0;
  double max_ratio = 0.0;  // max lhs / rhs over checked points
  std::vector<BoundViolation> violations;

  bool ok() const noexcept { return violations.empty(); }
};

Json to_json(const BoundReport& r);

/// Checks one trial (deterministic kinds) or the trial mean (stochastic
/// kinds). `f_star` is required for convex kinds; nonconvex kinds fall back to
/// the smallest objective in the traces. All traces must share constants.
BoundReport bound_check(const std::vector<const TraceFile*>& trials,
                        const ProblemConstants& constants, BoundKind kind,
                        std::optional<double> f_star, const BoundCheckOptions& options = {});

// ---------------------------------------------------------------------------
// Summaries

/// First recorded iteration with gap <= eps, per trial, averaged over the
/// trials that reach it. Cells are keyed by the header "cell" field.
Json summarize(const std::vector<TraceFile>& traces, const std::vector<double>& eps_targets);
/// Same shape with wall-clock means only; not reproducible across machines.
Json summarize_times(const std::vector<TraceFile>& traces, const std::vector<double>& eps_targets);
std::string format_summary_table(const Json& summary);

// ---------------------------------------------------------------------------
// Experiments

struct SynthSpec {
  Index n = 0;
  Index p = 0;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::optional<std::string> data_path;
  std::optional<SynthSpec> synth;
  std::optional<Index> dims;
  LossKind loss = LossKind::Logistic;
  PrimalNorm norm = PrimalNorm::L1;
  SetKind set = SetKind::L1Ball;
  double lambda = 10.0;
  std::vector<SolverKind> solvers{SolverKind::Tufw};
  std::vector<RuleKind> rules{RuleKind::DbdSqrtK};
  Sampling sampling = Sampling::CyclicBlock;
  StepSizeRule steps;
  long iterations = 1000;
  std::optional<long> horizon;  // K for fourth-root rules and fixed steps
  int trials = 1;
  std::uint64_t seed = 0;
  long gap_every = -1;  // -1: automatic (1, or 200 for long nonconvex runs)
  std::optional<double> stop_gap;
  HessianMode hessian_mode = HessianMode::Dense;
  ReturnPolicy return_policy = ReturnPolicy::Last;
  std::vector<double> eps_targets{1e-1, 1e-3, 1e-5};
  std::filesystem::path out_dir;
  int jobs = 1;
  std::optional<BoundKind> bound;
  std::optional<std::filesystem::path> reference_path;
};

Json to_json(const ExperimentConfig& config);
Problem load_problem(const ExperimentConfig& config);

/// Gap stride actually used: explicit when gap_every >= 0, else every
/// iteration except for nonconvex runs with K >= 100 n, which record every
/// 200 iterations.
long effective_gap_every(const ExperimentConfig& config, Index n);

struct FailedCell {
  std::string cell;
  int trial;
  std::string error;
};

struct ExperimentResult {
  std::vector<std::filesystem::path> traces;
  std::filesystem::path summary;
  std::vector<FailedCell> failed;
  std::size_t bound_violations = 0;
};

/// One trace per (solver, rule, trial) under out_dir plus summary.json and
/// summary_times.json. A failing cell is recorded and the run continues.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace tufw
