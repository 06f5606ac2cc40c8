#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tufw {

/// Univariate loss families l(v) of a scalar margin v = w^T x.
///
/// Labels are per observation: Logistic takes y in {-1, +1}, SigmoidSquared
/// takes y in {0, 1}, Quadratic takes any finite y.
enum class LossKind { Quadratic, Logistic, SigmoidSquared };

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct LipschitzConstants {
  double L;      // sup |l''|
  double L_hat;  // Lipschitz constant of l''
};

bool label_valid(LossKind kind, double y) noexcept;

double loss_value(LossKind kind, double y, double v);
double loss_d1(LossKind kind, double y, double v);
double loss_d2(LossKind kind, double y, double v);

/// l'(v) - l''(v) v, the intercept of the first-order model of l' around v.
/// Quadratic returns -y exactly so incremental intercept corrections cancel
/// without roundoff.
double taylor_intercept(LossKind kind, double y, double v);

/// Worst-case constants over the whole real line, not scaled by any feature
/// bound.
LipschitzConstants lipschitz_constants(LossKind kind) noexcept;

/// Accepts "quadratic", "logistic", "sigmoid-sq".
LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind kind) noexcept;

bool is_convex(LossKind kind) noexcept;

// Unchecked kernels used inside per-observation hot loops; labels are
// validated once when a Problem is built.
namespace detail {
double d1_unchecked(LossKind kind, double y, double v) noexcept;
double d2_unchecked(LossKind kind, double y, double v) noexcept;
double intercept_unchecked(LossKind kind, double y, double v) noexcept;
double value_unchecked(LossKind kind, double y, double v) noexcept;
}  // namespace detail

}  // namespace tufw
