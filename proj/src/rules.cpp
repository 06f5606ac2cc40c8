#include "tufw/rules.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>

namespace tufw {
namespace {

std::vector<Index> all_indices(Index n) {
  std::vector<Index> out(static_cast<std::size_t>(n));
  std::iota(out.begin(), out.end(), Index{0});
  return out;
}

void require_k(long k) {
  if (k < 1) throw std::invalid_argument("batch rules are evaluated for k >= 1");
}

}  // namespace

RuleKind parse_rule_kind(std::string_view name) {
  if (name == "sbd-sqrt") return RuleKind::SbdSqrtK;
  if (name == "dbd-sqrt") return RuleKind::DbdSqrtK;
  if (name == "sbd-k4") return RuleKind::SbdFourthK;
  if (name == "dbd-k4") return RuleKind::DbdFourthK;
  if (name == "empty") return RuleKind::Empty;
  if (name == "full") return RuleKind::Full;
  throw ConfigError("unknown rule '" + std::string(name) + "'");
}

std::string_view to_string(RuleKind kind) noexcept {
  switch (kind) {
    case RuleKind::SbdSqrtK:
      return "sbd-sqrt";
    case RuleKind::DbdSqrtK:
      return "dbd-sqrt";
    case RuleKind::SbdFourthK:
      return "sbd-k4";
    case RuleKind::DbdFourthK:
      return "dbd-k4";
    case RuleKind::Empty:
      return "empty";
    case RuleKind::Full:
      return "full";
  }
  return "?";
}

Sampling parse_sampling(std::string_view name) {
  if (name == "cyclic") return Sampling::CyclicBlock;
  if (name == "uniform") return Sampling::UniformNoReplacement;
  throw ConfigError("unknown sampling mode '" + std::string(name) + "'");
}

std::string_view to_string(Sampling sampling) noexcept {
  return sampling == Sampling::CyclicBlock ? "cyclic" : "uniform";
}

long integer_sqrt(long k) noexcept {
  if (k <= 0) return 0;
  auto r = static_cast<long>(std::sqrt(static_cast<double>(k)));
  while (r * r > k) --r;
  while ((r + 1) * (r + 1) <= k) ++r;
  return r;
}

long integer_fourth_root(long k) noexcept { return integer_sqrt(integer_sqrt(k)); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

BatchRule::BatchRule(RuleSpec spec) : spec_(spec) {
  const bool needs_horizon =
      spec_.kind == RuleKind::SbdFourthK || spec_.kind == RuleKind::DbdFourthK;
  if (needs_horizon && (!spec_.horizon || *spec_.horizon < 1)) {
    throw ConfigError(std::string(to_string(spec_.kind)) + " needs a horizon K >= 1");
  }
}

bool BatchRule::stochastic() const noexcept {
  return spec_.kind == RuleKind::SbdSqrtK || spec_.kind == RuleKind::SbdFourthK;
}

double BatchRule::expected_size(long k, Index n) const {
  require_k(k);
  const auto dn = static_cast<double>(n);
  switch (spec_.kind) {
    case RuleKind::SbdSqrtK:
      return dn / std::sqrt(static_cast<double>(k));
    case RuleKind::SbdFourthK:
      return dn / std::sqrt(std::sqrt(static_cast<double>(*spec_.horizon)));
    case RuleKind::DbdSqrtK: {
      const long r = integer_sqrt(k);
      return r * r == k ? dn : 0.0;
    }
    case RuleKind::DbdFourthK:
      return k % integer_fourth_root(*spec_.horizon) == 0 ? dn : 0.0;
    case RuleKind::Empty:
      return 0.0;
    case RuleKind::Full:
      return dn;
  }
  return 0.0;
}

std::vector<Index> BatchRule::indices(long k, Index n) const {
  require_k(k);
  if (!stochastic()) {
    return expected_size(k, n) > 0.0 ? all_indices(n) : std::vector<Index>{};
  }

  std::mt19937_64 rng(mix_seed(spec_.seed, static_cast<std::uint64_t>(k)));
  const double beta = expected_size(k, n);
  const double base = std::floor(beta);
  const double frac = beta - base;
  auto m = static_cast<Index>(base);
  if (frac > 0.0) {
    std::bernoulli_distribution xi(frac);
    if (xi(rng)) ++m;
  }
  m = std::min(m, n);
  if (m == 0) return {};
  if (m == n) return all_indices(n);

  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(m));
  if (spec_.sampling == Sampling::CyclicBlock) {
    std::uniform_int_distribution<Index> start_dist(0, n - 1);
    const Index start = start_dist(rng);
    for (Index t = 0; t < m; ++t) out.push_back((start + t) % n);
    return out;
  }
  // Floyd's algorithm: a uniform m-subset of [0, n).
  std::unordered_set<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(m) * 2);
  for (Index j = n - m; j < n; ++j) {
    std::uniform_int_distribution<Index> dist(0, j);
    const Index t = dist(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  out.assign(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace tufw
