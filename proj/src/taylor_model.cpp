#include "tufw/taylor_model.hpp"

#include <stdexcept>
#include <string>

namespace tufw {
namespace {

struct ColumnView {
  const SparseMatrix::StorageIndex* index;
  const double* value;
  Index size;

  double dot(const Eigen::Ref<const Vector>& x) const {
    double acc = 0.0;
    for (Index t = 0; t < size; ++t) acc += value[t] * x[index[t]];
    return acc;
  }

  void axpy(double alpha, Vector& out) const {
    for (Index t = 0; t < size; ++t) out[index[t]] += alpha * value[t];
  }
};

ColumnView column(const SparseMatrix& W, Index i) {
  const auto begin = W.outerIndexPtr()[i];
  const auto end = W.outerIndexPtr()[i + 1];
  return {W.innerIndexPtr() + begin, W.valuePtr() + begin, static_cast<Index>(end - begin)};
}

std::uint64_t u64(Index v) { return static_cast<std::uint64_t>(v); }

}  // namespace

double objective(const Problem& problem, const Eigen::Ref<const Vector>& x,
                 MetricsCounter* counter) {
  const auto& W = problem.W();
  const auto& y = problem.y();
  const Index n = problem.n();
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    acc += detail::value_unchecked(problem.family(), y[i], column(W, i).dot(x));
  }
  if (counter) counter->flops += 2 * u64(W.nonZeros()) + u64(n) * (kLossEvalFlops + 1);
  return acc / static_cast<double>(n);
}

Vector exact_gradient(const Problem& problem, const Eigen::Ref<const Vector>& x,
                      MetricsCounter* counter) {
  const auto& W = problem.W();
  const auto& y = problem.y();
  const Index n = problem.n();
  const double inv_n = 1.0 / static_cast<double>(n);
  Vector g = Vector::Zero(problem.p());
  for (Index i = 0; i < n; ++i) {
    const auto col = column(W, i);
    col.axpy(detail::d1_unchecked(problem.family(), y[i], col.dot(x)) * inv_n, g);
  }
  if (counter) counter->flops += exact_gradient_flops(problem);
  return g;
}

std::uint64_t exact_gradient_flops(const Problem& problem) noexcept {
  return 4 * u64(problem.W().nonZeros()) + u64(problem.n()) * (kLossEvalFlops + 1);
}

HessianMode parse_hessian_mode(std::string_view name) {
  if (name == "dense") return HessianMode::Dense;
  if (name == "factored") return HessianMode::Factored;
  throw std::invalid_argument("unknown hessian mode '" + std::string(name) + "'");
}

std::string_view to_string(HessianMode mode) noexcept {
  return mode == HessianMode::Dense ? "dense" : "factored";
}

TaylorModel::TaylorModel(const Problem& problem, const Eigen::Ref<const Vector>& x0,
                         HessianMode mode)
    : problem_(&problem), mode_(mode) {
  const Index n = problem.n();
  const Index p = problem.p();
  if (x0.size() != p) {
    throw DimensionError("initial point has dimension " + std::to_string(x0.size()) +
                         ", problem has p = " + std::to_string(p));
  }
  theta_.resize(n);
  slope_.resize(n);
  intercept_.resize(n);
  last_update_.assign(static_cast<std::size_t>(n), 0);
  const auto& W = problem.W();
  const auto& y = problem.y();
  for (Index i = 0; i < n; ++i) {
    theta_[i] = column(W, i).dot(x0);
    slope_[i] = detail::d2_unchecked(problem.family(), y[i], theta_[i]);
    intercept_[i] = detail::intercept_unchecked(problem.family(), y[i], theta_[i]);
  }
  update_flops_ += 2 * u64(W.nonZeros()) + u64(n) * 2 * kLossEvalFlops;
  rebuild();
}

void TaylorModel::rebuild() {
  const auto& W = problem_->W();
  const Index n = problem_->n();
  const Index p = problem_->p();
  const double inv_n = 1.0 / static_cast<double>(n);
  q_ = Vector::Zero(p);
  for (Index i = 0; i < n; ++i) {
    column(W, i).axpy(intercept_[i] * inv_n, q_);
  }
  update_flops_ += 2 * u64(W.nonZeros()) + u64(n);
  if (mode_ == HessianMode::Dense) {
    H_ = Eigen::MatrixXd::Zero(p, p);
    for (Index i = 0; i < n; ++i) apply_rank_one(i, slope_[i] * inv_n);
    update_flops_ += u64(n);
  }
  ++rebuilds_;
}

// Lower triangle of H += scale * w_i w_i^T. Column indices are sorted, so
// index[b] >= index[a] for b >= a.
void TaylorModel::apply_rank_one(Index i, double scale) {
  const auto col = column(problem_->W(), i);
  for (Index a = 0; a < col.size; ++a) {
    const double va = scale * col.value[a];
    double* h = H_.col(col.index[a]).data();
    for (Index b = a; b < col.size; ++b) {
      h[col.index[b]] += va * col.value[b];
    }
  }
  update_flops_ += u64(col.size) + u64(col.size) * u64(col.size + 1);
}

void TaylorModel::update_batch(std::span<const Index> batch, const Eigen::Ref<const Vector>& x,
                               long k) {
  if (batch.empty()) return;
  const Index n = problem_->n();
  if (x.size() != problem_->p()) {
    throw DimensionError("update_batch: iterate dimension mismatch");
  }
  for (const Index i : batch) {
    if (i < 0 || i >= n) {
      throw std::out_of_range("update_batch: index " + std::to_string(i) + " outside [0, " +
                              std::to_string(n) + ")");
    }
  }
  bool full = static_cast<Index>(batch.size()) == n;
  if (full) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (const Index i : batch) {
      if (seen[static_cast<std::size_t>(i)]) {
        full = false;
        break;
      }
      seen[static_cast<std::size_t>(i)] = 1;
    }
  }

  const auto& W = problem_->W();
  const auto& y = problem_->y();
  const auto family = problem_->family();
  const double inv_n = 1.0 / static_cast<double>(n);
  for (const Index i : batch) {
    const auto col = column(W, i);
    const double theta = col.dot(x);
    const double slope = detail::d2_unchecked(family, y[i], theta);
    const double intercept = detail::intercept_unchecked(family, y[i], theta);
    update_flops_ += 2 * u64(col.size) + 2 * kLossEvalFlops;
    if (!full) {
      const double d_intercept = intercept - intercept_[i];
      const double d_slope = slope - slope_[i];
      update_flops_ += 2;
      if (d_intercept != 0.0) {
        col.axpy(d_intercept * inv_n, q_);
        update_flops_ += 2 * u64(col.size) + 1;
      }
      if (d_slope != 0.0 && mode_ == HessianMode::Dense) {
        apply_rank_one(i, d_slope * inv_n);
        update_flops_ += 1;
      }
    }
    theta_[i] = theta;
    slope_[i] = slope;
    intercept_[i] = intercept;
    last_update_[static_cast<std::size_t>(i)] = k;
  }
  if (full) rebuild();
}

void TaylorModel::apply_hessian(const Eigen::Ref<const Vector>& x, Vector& out) {
  const Index p = problem_->p();
  if (mode_ == HessianMode::Dense) {
    out.noalias() = H_.selfadjointView<Eigen::Lower>() * x;
    estimate_flops_ += 2 * u64(p) * u64(p);
    return;
  }
  const auto& W = problem_->W();
  const Index n = problem_->n();
  const double inv_n = 1.0 / static_cast<double>(n);
  out.setZero(p);
  for (Index i = 0; i < n; ++i) {
    const auto col = column(W, i);
    col.axpy(slope_[i] * inv_n * col.dot(x), out);
  }
  estimate_flops_ += 4 * u64(W.nonZeros()) + 2 * u64(n);
}

void TaylorModel::gradient_estimate(const Eigen::Ref<const Vector>& x, Vector& out) {
  if (x.size() != problem_->p()) {
    throw DimensionError("gradient_estimate: dimension mismatch");
  }
  apply_hessian(x, out);
  out += q_;
  estimate_flops_ += u64(problem_->p());
}

Vector TaylorModel::gradient_estimate(const Eigen::Ref<const Vector>& x) {
  Vector g;
  gradient_estimate(x, g);
  return g;
}

double TaylorModel::curvature(const Eigen::Ref<const Vector>& d) {
  if (d.size() != problem_->p()) {
    throw DimensionError("curvature: dimension mismatch");
  }
  if (mode_ == HessianMode::Dense) {
    Vector hd;
    apply_hessian(d, hd);
    estimate_flops_ += 2 * u64(problem_->p());
    return d.dot(hd);
  }
  const auto& W = problem_->W();
  const Index n = problem_->n();
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double m = column(W, i).dot(d);
    acc += slope_[i] * m * m;
  }
  estimate_flops_ += 2 * u64(W.nonZeros()) + 3 * u64(n);
  return acc / static_cast<double>(n);
}

double TaylorModel::error_bound(std::span<const double> steps, double diameter) const {
  const auto k = static_cast<long>(steps.size());
  std::vector<double> prefix(steps.size() + 1, 0.0);
  for (std::size_t j = 0; j < steps.size(); ++j) prefix[j + 1] = prefix[j] + steps[j];
  double acc = 0.0;
  for (const long tau : last_update_) {
    if (tau > k) {
      throw std::invalid_argument("error_bound: step history shorter than last update");
    }
    const double s = prefix[static_cast<std::size_t>(k)] - prefix[static_cast<std::size_t>(tau)];
    acc += s * s;
  }
  const double n = static_cast<double>(problem_->n());
  return problem_->Lhat_eff() * diameter * diameter * diameter / (2.0 * n) * acc;
}

Eigen::MatrixXd TaylorModel::hessian() const {
  const Index p = problem_->p();
  if (mode_ == HessianMode::Dense) {
    Eigen::MatrixXd full = H_.selfadjointView<Eigen::Lower>();
    return full;
  }
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(p, p);
  const auto& W = problem_->W();
  const double inv_n = 1.0 / static_cast<double>(problem_->n());
  for (Index i = 0; i < problem_->n(); ++i) {
    const auto col = column(W, i);
    for (Index a = 0; a < col.size; ++a) {
      for (Index b = 0; b < col.size; ++b) {
        full(col.index[a], col.index[b]) += slope_[i] * inv_n * col.value[a] * col.value[b];
      }
    }
  }
  return full;
}

}  // namespace tufw
