#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string_view>
#include <vector>

namespace tufw {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

enum class SetKind { L1Ball, Simplex };
enum class Norm { L1, L2, Linf };

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A vertex of a feasible polytope: value * e_index.
struct Vertex {
  Index index = 0;
  double value = 0.0;

  Vector dense(Index p) const {
    Vector s = Vector::Zero(p);
    s[index] = value;
    return s;
  }
};

/// Compact polytope with an explicit vertex list, scaled by a radius lambda.
///
/// L1Ball is {x : ||x||_1 <= lambda} with vertices +-lambda e_j.
/// Simplex is {x >= 0 : sum x = lambda} with vertices lambda e_j.
class FeasibleSet {
 public:
  FeasibleSet(SetKind kind, double radius);

  SetKind kind() const noexcept { return kind_; }
  double radius() const noexcept { return radius_; }

  /// Minimizer of <g, s> over the set. Ties go to the lowest index and
  /// sign(0) is +1.
  Vertex lmo_vertex(const Eigen::Ref<const Vector>& g) const;
  Vector lmo(const Eigen::Ref<const Vector>& g) const { return lmo_vertex(g).dense(g.size()); }

  /// All vertices in ambient dimension p, in a fixed order.
  std::vector<Vertex> vertices(Index p) const;

  /// max ||u - v|| over the set, by enumeration of vertex pairs.
  double diameter(Norm norm, Index p) const;

  /// max ||W^T (x - y)||_q over x, y in the set, for W with p rows.
  double range_diameter(const SparseMatrix& W, Norm q) const;

  bool contains(const Eigen::Ref<const Vector>& x, double rel_tol = 1e-12) const;

 private:
  SetKind kind_;
  double radius_;
};

SetKind parse_set_kind(std::string_view name);
std::string_view to_string(SetKind kind) noexcept;
Norm parse_norm(std::string_view name);

}  // namespace tufw
