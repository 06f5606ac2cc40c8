#pragma once

#include "tufw/geometry.hpp"
#include "tufw/losses.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

namespace tufw {

/// Raw labeled data: W is p x n with one sparse column per observation.
struct LabeledData {
  SparseMatrix W;
  Vector y;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Reads LIBSVM text: "<label> <idx>:<val> ..." with 1-based, strictly
/// increasing indices. Blank lines and '#' comments are skipped. The row
/// count is the largest index seen unless `dims` overrides it (it may not be
/// smaller than the largest index).
LabeledData parse_libsvm(std::istream& in, std::optional<Index> dims = std::nullopt);
LabeledData load_libsvm(const std::string& path, std::optional<Index> dims = std::nullopt);

/// Inverse of parse_libsvm; values are written with round-trip precision.
void write_libsvm(std::ostream& out, const LabeledData& data);

/// Primal norm on x. The feature bound M uses its dual (l1 -> linf, l2 -> l2).
enum class PrimalNorm { L1, L2 };

PrimalNorm parse_primal_norm(std::string_view name);
std::string_view to_string(PrimalNorm norm) noexcept;
Norm as_norm(PrimalNorm norm) noexcept;

/// max_i ||w_i||_* under the dual of `norm`.
double feature_bound(const SparseMatrix& W, PrimalNorm norm);

/// An ERM instance F(x) = (1/n) sum_i l(y_i, w_i^T x). Immutable once built.
class Problem {
 public:
  /// Validates labels, remapping {0,1} <-> {-1,+1} when the family needs the
  /// other convention (see labels_remapped()).
  Problem(LabeledData data, LossKind family, PrimalNorm norm = PrimalNorm::L1);

  const SparseMatrix& W() const noexcept { return W_; }
  const Vector& y() const noexcept { return y_; }
  LossKind family() const noexcept { return family_; }
  PrimalNorm primal_norm() const noexcept { return norm_; }

  Index n() const noexcept { return W_.cols(); }
  Index p() const noexcept { return W_.rows(); }
  /// Largest number of nonzeros in a single column.
  Index max_column_nnz() const noexcept { return max_nnz_; }

  double M() const noexcept { return M_; }
  /// Lipschitz constant of each grad f_i: L * M^2.
  double L_eff() const noexcept { return L_eff_; }
  /// Lipschitz constant of each Hessian of f_i: L_hat * M^3.
  double Lhat_eff() const noexcept { return Lhat_eff_; }
  LipschitzConstants univariate_constants() const noexcept { return lipschitz_constants(family_); }

  std::size_t labels_remapped() const noexcept { return remapped_; }

  /// 64-bit FNV-1a over shape, sparse structure, values, labels and family.
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }

 private:
  SparseMatrix W_;
  Vector y_;
  LossKind family_;
  PrimalNorm norm_;
  Index max_nnz_ = 0;
  double M_ = 0.0;
  double L_eff_ = 0.0;
  double Lhat_eff_ = 0.0;
  std::size_t remapped_ = 0;
  std::uint64_t fingerprint_ = 0;
};

/// Deterministic synthetic instance.
///
/// Features: i.i.d. standard normal entries, each column then rescaled to unit
/// l2 norm. Labels come from a planted x_bar ~ N(0, I_p) with margin
/// m_i = w_i^T x_bar: quadratic y_i = m_i + 0.1 z_i, logistic y_i = +1 with
/// probability sigma(m_i) (else -1), sigmoid-squared y_i = 1 with probability
/// sigma(m_i) (else 0).
Problem synth_problem(Index n, Index p, LossKind family, std::uint64_t seed,
                      PrimalNorm norm = PrimalNorm::L1);

}  // namespace tufw
