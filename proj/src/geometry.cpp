#include "tufw/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tufw {
namespace {

using RowMajorSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Accumulates |v_k| into an l_q norm without materializing the vector.
class NormAccumulator {
 public:
  explicit NormAccumulator(Norm q) : q_(q) {}

  void add(double v) {
    const double a = std::abs(v);
    switch (q_) {
      case Norm::L1:
        acc_ += a;
        break;
      case Norm::L2:
        acc_ += a * a;
        break;
      case Norm::Linf:
        acc_ = std::max(acc_, a);
        break;
    }
  }

  double value() const { return q_ == Norm::L2 ? std::sqrt(acc_) : acc_; }

 private:
  Norm q_;
  double acc_ = 0.0;
};

// || alpha * R.row(i) + beta * R.row(j) ||_q by merging two sorted sparse rows.
double combined_row_norm(const RowMajorSparse& R, Index i, double alpha, Index j, double beta,
                         Norm q) {
  NormAccumulator acc(q);
  RowMajorSparse::InnerIterator a(R, i);
  RowMajorSparse::InnerIterator b(R, j);
  while (a || b) {
    if (b && (!a || b.index() < a.index())) {
      acc.add(beta * b.value());
      ++b;
    } else if (a && (!b || a.index() < b.index())) {
      acc.add(alpha * a.value());
      ++a;
    } else {
      acc.add(alpha * a.value() + beta * b.value());
      ++a;
      ++b;
    }
  }
  return acc.value();
}

double two_sparse_norm(const Vertex& u, const Vertex& v, Norm norm) {
  NormAccumulator acc(norm);
  if (u.index == v.index) {
    acc.add(u.value - v.value);
  } else {
    acc.add(u.value);
    acc.add(-v.value);
  }
  return acc.value();
}

}  // namespace

FeasibleSet::FeasibleSet(SetKind kind, double radius) : kind_(kind), radius_(radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("feasible set radius must be positive and finite");
  }
}

Vertex FeasibleSet::lmo_vertex(const Eigen::Ref<const Vector>& g) const {
  if (g.size() == 0) {
    throw DimensionError("lmo: empty gradient vector");
  }
  Index best = 0;
  if (kind_ == SetKind::L1Ball) {
    double best_abs = std::abs(g[0]);
    for (Index j = 1; j < g.size(); ++j) {
      const double a = std::abs(g[j]);
      if (a > best_abs) {
        best_abs = a;
        best = j;
      }
    }
    const double sign = g[best] >= 0.0 ? 1.0 : -1.0;
    return {best, -radius_ * sign};
  }
  for (Index j = 1; j < g.size(); ++j) {
    if (g[j] < g[best]) best = j;
  }
  return {best, radius_};
}

std::vector<Vertex> FeasibleSet::vertices(Index p) const {
  std::vector<Vertex> out;
  out.reserve(static_cast<std::size_t>(kind_ == SetKind::L1Ball ? 2 * p : p));
  for (Index j = 0; j < p; ++j) {
    out.push_back({j, radius_});
    if (kind_ == SetKind::L1Ball) out.push_back({j, -radius_});
  }
  return out;
}

double FeasibleSet::diameter(Norm norm, Index p) const {
  const auto verts = vertices(p);
  double best = 0.0;
  for (std::size_t a = 0; a < verts.size(); ++a) {
    for (std::size_t b = a + 1; b < verts.size(); ++b) {
      best = std::max(best, two_sparse_norm(verts[a], verts[b], norm));
    }
  }
  return best;
}

double FeasibleSet::range_diameter(const SparseMatrix& W, Norm q) const {
  const RowMajorSparse R = W;
  const Index p = R.rows();
  // W^T (x - y) for vertices x = a e_i, y = b e_j equals a r_i - b r_j with
  // r_i the i-th row of W. The norm is invariant under swapping the pair and
  // under a global sign flip, so each unordered index pair is visited once.
  double best = 0.0;
  for (Index i = 0; i < p; ++i) {
    if (kind_ == SetKind::L1Ball) {
      best = std::max(best, combined_row_norm(R, i, 2.0, i, 0.0, q));
    }
    for (Index j = i + 1; j < p; ++j) {
      best = std::max(best, combined_row_norm(R, i, 1.0, j, -1.0, q));
      if (kind_ == SetKind::L1Ball) {
        best = std::max(best, combined_row_norm(R, i, 1.0, j, 1.0, q));
      }
    }
  }
  return radius_ * best;
}

bool FeasibleSet::contains(const Eigen::Ref<const Vector>& x, double rel_tol) const {
  const double slack = radius_ * rel_tol;
  if (kind_ == SetKind::L1Ball) {
    return x.lpNorm<1>() <= radius_ + slack;
  }
  return x.minCoeff() >= -slack && std::abs(x.sum() - radius_) <= slack;
}

SetKind parse_set_kind(std::string_view name) {
  if (name == "l1") return SetKind::L1Ball;
  if (name == "simplex") return SetKind::Simplex;
  throw std::invalid_argument("unknown feasible set '" + std::string(name) + "'");
}

std::string_view to_string(SetKind kind) noexcept {
  return kind == SetKind::L1Ball ? "l1" : "simplex";
}

Norm parse_norm(std::string_view name) {
  if (name == "l1" || name == "1") return Norm::L1;
  if (name == "l2" || name == "2") return Norm::L2;
  if (name == "linf" || name == "inf") return Norm::Linf;
  throw std::invalid_argument("unknown norm '" + std::string(name) + "'");
}

}  // namespace tufw
