#pragma once

#include "tufw/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace tufw {

/// Batch rules for refreshing Taylor points at iteration k >= 1.
///
///   SbdSqrtK    stochastic, E|B_k| = n / sqrt(k)
///   DbdSqrtK    [n] when k is a perfect square, else empty
///   SbdFourthK  stochastic, E|B_k| = n / K^(1/4) for a horizon K
///   DbdFourthK  [n] when floor(K^(1/4)) divides k, else empty
///   Empty       never refresh after the initial build
///   Full        refresh everything every iteration (exact gradients)
enum class RuleKind { SbdSqrtK, DbdSqrtK, SbdFourthK, DbdFourthK, Empty, Full };

/// How a stochastic rule picks its m indices: a uniform subset without
/// replacement, or m consecutive indices (mod n) from a uniform start.
enum class Sampling { UniformNoReplacement, CyclicBlock };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RuleSpec {
  RuleKind kind = RuleKind::DbdSqrtK;
  std::optional<long> horizon;
  Sampling sampling = Sampling::CyclicBlock;
  std::uint64_t seed = 0;
};

RuleKind parse_rule_kind(std::string_view name);
std::string_view to_string(RuleKind kind) noexcept;
Sampling parse_sampling(std::string_view name);
std::string_view to_string(Sampling sampling) noexcept;

/// floor(sqrt(k)) and floor(k^(1/4)) computed exactly on integers.
long integer_sqrt(long k) noexcept;
long integer_fourth_root(long k) noexcept;

/// splitmix64 finalizer; used to derive independent stream keys.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

class BatchRule {
 public:
  /// Throws ConfigError when a fourth-root rule has no positive horizon.
  explicit BatchRule(RuleSpec spec);

  const RuleSpec& spec() const noexcept { return spec_; }
  bool stochastic() const noexcept;

  /// B_k as 0-based indices, no duplicates. The random stream is keyed by
  /// (seed, k), so the result does not depend on call order.
  std::vector<Index> indices(long k, Index n) const;

  /// beta_k for stochastic rules, |B_k| for deterministic ones.
  double expected_size(long k, Index n) const;

 private:
  RuleSpec spec_;
};

}  // namespace tufw
