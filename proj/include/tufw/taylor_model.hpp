#pragma once

#include "tufw/dataset.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace tufw {

/// Flop charge for one evaluation of l', l'' or the Taylor intercept.
inline constexpr std::uint64_t kLossEvalFlops = 8;

/// Counter for exact full-batch quantities (objective, gradient, FW gap).
/// Kept apart from algorithm flops so reported solver costs exclude offline
/// metrics.
struct MetricsCounter {
  std::uint64_t flops = 0;
};

/// Exact F(x) = (1/n) sum_i l(y_i, w_i^T x).
double objective(const Problem& problem, const Eigen::Ref<const Vector>& x,
                 MetricsCounter* counter = nullptr);

/// Exact grad F(x) = (1/n) sum_i l'(y_i, w_i^T x) w_i.
Vector exact_gradient(const Problem& problem, const Eigen::Ref<const Vector>& x,
                      MetricsCounter* counter = nullptr);

/// Flops of one exact gradient evaluation, used to express algorithm costs in
/// exact-gradient equivalents.
std::uint64_t exact_gradient_flops(const Problem& problem) noexcept;

enum class HessianMode { Dense, Factored };

HessianMode parse_hessian_mode(std::string_view name);
std::string_view to_string(HessianMode mode) noexcept;

/// Aggregated second-order model of the gradient, g(x) = q + H x, built from
/// per-observation Taylor points.
///
/// Under linear prediction the Taylor point b_i enters only through its
/// margin theta_i = w_i^T b_i, so each observation contributes
///   l'(theta_i) w_i + l''(theta_i) w_i (w_i^T x - theta_i)
/// and moving one Taylor point is a rank-one correction of H plus an axpy on q.
///
/// Dense mode keeps the lower triangle of H (p x p). Factored mode keeps only
/// c_i = l''(theta_i) / n and evaluates H x as W (c .* (W^T x)).
///
/// The referenced Problem must outlive the model.
class TaylorModel {
 public:
  /// All Taylor points at x0 (B_0 = [n]); last_update is 0 for every index.
  TaylorModel(const Problem& problem, const Eigen::Ref<const Vector>& x0,
              HessianMode mode = HessianMode::Dense);

  /// Moves the Taylor points in `batch` to x and stamps them with iteration
  /// k. A batch covering every observation re-sums q and H from scratch,
  /// which discards roundoff accumulated by earlier rank-one corrections.
  void update_batch(std::span<const Index> batch, const Eigen::Ref<const Vector>& x, long k);

  /// g = q + H x.
  Vector gradient_estimate(const Eigen::Ref<const Vector>& x);
  void gradient_estimate(const Eigen::Ref<const Vector>& x, Vector& out);

  /// d^T H d; negative values are possible for nonconvex families.
  double curvature(const Eigen::Ref<const Vector>& d);

  /// Upper bound on (grad F(x^k) - g^k)^T (u - v) over u, v in the feasible
  /// set:
  ///   (Lhat_eff D^3 / 2n) sum_i (sum_{j = tau_i}^{k-1} gamma_j)^2
  /// where k = steps.size(), steps[j] = gamma_j and tau_i = last_update(i).
  double error_bound(std::span<const double> steps, double diameter) const;

  const Problem& problem() const noexcept { return *problem_; }
  HessianMode mode() const noexcept { return mode_; }
  const Vector& theta() const noexcept { return theta_; }
  const std::vector<long>& last_update() const noexcept { return last_update_; }
  const Vector& q() const noexcept { return q_; }
  /// Full symmetric H, assembled on demand in factored mode.
  Eigen::MatrixXd hessian() const;

  /// Cumulative flops spent moving Taylor points (including the initial
  /// build).
  std::uint64_t update_flops() const noexcept { return update_flops_; }
  /// Cumulative flops spent in gradient_estimate and curvature.
  std::uint64_t estimate_flops() const noexcept { return estimate_flops_; }
  std::uint64_t full_rebuilds() const noexcept { return rebuilds_; }

 private:
  void rebuild();
  void apply_rank_one(Index i, double scale);
  void apply_hessian(const Eigen::Ref<const Vector>& x, Vector& out);

  const Problem* problem_;
  HessianMode mode_;
  Vector theta_;
  Vector slope_;      // l''(theta_i)
  Vector intercept_;  // l'(theta_i) - l''(theta_i) theta_i
  std::vector<long> last_update_;
  Vector q_;
  Eigen::MatrixXd H_;  // lower triangle only (dense mode)
  Vector margins_;     // scratch for factored mode
  std::uint64_t update_flops_ = 0;
  std::uint64_t estimate_flops_ = 0;
  std::uint64_t rebuilds_ = 0;
};

}  // namespace tufw
