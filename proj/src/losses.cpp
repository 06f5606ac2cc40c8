#include "tufw/losses.hpp"

#include <cmath>

namespace tufw {
namespace {

// sigma(t) = 1 / (1 + exp(-t)) without overflow on either tail.
double sigmoid(double t) noexcept {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// ln(1 + exp(t)).
double softplus(double t) noexcept {
  if (t > 0.0) {
    return t + std::log1p(std::exp(-t));
  }
  return std::log1p(std::exp(t));
}

void require_label(LossKind kind, double y) {
  if (!label_valid(kind, y)) {
    throw DomainError("invalid label " + std::to_string(y) + " for loss family " +
                      std::string(to_string(kind)));
  }
}

}  // namespace

bool label_valid(LossKind kind, double y) noexcept {
  switch (kind) {
    case LossKind::Quadratic:
      return std::isfinite(y);
    case LossKind::Logistic:
      return y == 1.0 || y == -1.0;
    case LossKind::SigmoidSquared:
      return y == 0.0 || y == 1.0;
  }
  return false;
}

namespace detail {

double value_unchecked(LossKind kind, double y, double v) noexcept {
  switch (kind) {
    case LossKind::Quadratic: {
      const double r = y - v;
      return 0.5 * r * r;
    }
    case LossKind::Logistic:
      return softplus(-y * v);
    case LossKind::SigmoidSquared: {
      const double r = y - sigmoid(v);
      return r * r;
    }
  }
  return 0.0;
}

double d1_unchecked(LossKind kind, double y, double v) noexcept {
  switch (kind) {
    case LossKind::Quadratic:
      return v - y;
    case LossKind::Logistic:
      // -y / (1 + exp(y v))
      return -y * sigmoid(-y * v);
    case LossKind::SigmoidSquared: {
      const double s = sigmoid(v);
      const double ds = s * sigmoid(-v);
      return -2.0 * ds * (y - s);
    }
  }
  return 0.0;
}

double d2_unchecked(LossKind kind, double y, double v) noexcept {
  switch (kind) {
    case LossKind::Quadratic:
      return 1.0;
    case LossKind::Logistic: {
      // y^2 exp(yv) / (1 + exp(yv))^2 with y^2 = 1
      return sigmoid(v) * sigmoid(-v);
    }
    case LossKind::SigmoidSquared: {
      const double s = sigmoid(v);
      const double sm = sigmoid(-v);
      const double ds = s * sm;
      const double dds = ds * (sm - s);
      return 2.0 * ds * ds - 2.0 * dds * (y - s);
    }
  }
  return 0.0;
}

double intercept_unchecked(LossKind kind, double y, double v) noexcept {
  if (kind == LossKind::Quadratic) {
    return -y;
  }
  return d1_unchecked(kind, y, v) - d2_unchecked(kind, y, v) * v;
}

}  // namespace detail

double loss_value(LossKind kind, double y, double v) {
  require_label(kind, y);
  return detail::value_unchecked(kind, y, v);
}

double loss_d1(LossKind kind, double y, double v) {
  require_label(kind, y);
  return detail::d1_unchecked(kind, y, v);
}

double loss_d2(LossKind kind, double y, double v) {
  require_label(kind, y);
  return detail::d2_unchecked(kind, y, v);
}

double taylor_intercept(LossKind kind, double y, double v) {
  require_label(kind, y);
  return detail::intercept_unchecked(kind, y, v);
}

LipschitzConstants lipschitz_constants(LossKind kind) noexcept {
  const double sqrt3 = std::sqrt(3.0);
  switch (kind) {
    case LossKind::Quadratic:
      return {1.0, 0.0};
    case LossKind::Logistic:
      return {0.25, 1.0 / (6.0 * sqrt3)};
    case LossKind::SigmoidSquared:
      return {1.0 / 8.0 + 1.0 / (3.0 * sqrt3), 1.0 / (4.0 * sqrt3) + 1.0 / 12.0};
  }
  return {0.0, 0.0};
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "quadratic") return LossKind::Quadratic;
  if (name == "logistic") return LossKind::Logistic;
  if (name == "sigmoid-sq") return LossKind::SigmoidSquared;
  throw std::invalid_argument("unknown loss family '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::Quadratic:
      return "quadratic";
    case LossKind::Logistic:
      return "logistic";
    case LossKind::SigmoidSquared:
      return "sigmoid-sq";
  }
  return "?";
}

bool is_convex(LossKind kind) noexcept { return kind != LossKind::SigmoidSquared; }

}  // namespace tufw
