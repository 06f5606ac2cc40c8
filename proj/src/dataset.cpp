#include "tufw/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <vector>

namespace tufw {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return false;
  const char* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
  std::uint64_t digest() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

LabeledData parse_libsvm(std::istream& in, std::optional<Index> dims) {
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<double> labels;
  std::string line;
  std::size_t line_no = 0;
  long long max_index = 0;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) {
      view = view.substr(0, hash);
    }
    view = trim(view);
    if (view.empty()) continue;

    const auto col = static_cast<Index>(labels.size());
    std::size_t pos = 0;
    bool first = true;
    long long prev_index = 0;
    while (pos < view.size()) {
      const auto next = view.find_first_of(" \t", pos);
      const auto token = view.substr(pos, next == std::string_view::npos ? view.size() - pos
                                                                       : next - pos);
      pos = next == std::string_view::npos ? view.size() : view.find_first_not_of(" \t", next);
      if (pos == std::string_view::npos) pos = view.size();

      if (first) {
        double label = 0.0;
        if (!parse_number(token, label) || !std::isfinite(label)) {
          throw ParseError(line_no, "malformed label '" + std::string(token) + "'");
        }
        labels.push_back(label);
        first = false;
        continue;
      }
      const auto colon = token.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError(line_no, "malformed feature token '" + std::string(token) + "'");
      }
      long long index = 0;
      double value = 0.0;
      if (!parse_number(token.substr(0, colon), index) ||
          !parse_number(token.substr(colon + 1), value) || !std::isfinite(value)) {
        throw ParseError(line_no, "malformed feature token '" + std::string(token) + "'");
      }
      if (index < 1) {
        throw ParseError(line_no, "feature index must be >= 1, got " + std::to_string(index));
      }
      if (index <= prev_index) {
        throw ParseError(line_no, "feature indices must be strictly increasing (" +
                                      std::to_string(prev_index) + " then " +
                                      std::to_string(index) + ")");
      }
      prev_index = index;
      max_index = std::max(max_index, index);
      triplets.emplace_back(static_cast<Index>(index - 1), col, value);
    }
  }

  if (labels.empty()) {
    throw ParseError(line_no, "no observations in input");
  }
  Index p = static_cast<Index>(max_index);
  if (dims) {
    if (*dims < p) {
      throw ParseError(line_no, "--dims " + std::to_string(*dims) +
                                    " is smaller than the largest feature index " +
                                    std::to_string(p));
    }
    p = *dims;
  }
  if (p < 1) p = 1;

  LabeledData data;
  data.W.resize(p, static_cast<Index>(labels.size()));
  data.W.setFromTriplets(triplets.begin(), triplets.end());
  data.W.makeCompressed();
  data.y = Eigen::Map<const Vector>(labels.data(), static_cast<Index>(labels.size()));
  return data;
}

LabeledData load_libsvm(const std::string& path, std::optional<Index> dims) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open data file '" + path + "'");
  }
  return parse_libsvm(in, dims);
}

void write_libsvm(std::ostream& out, const LabeledData& data) {
  for (Index i = 0; i < data.W.cols(); ++i) {
    out << format_double(data.y[i]);
    for (SparseMatrix::InnerIterator it(data.W, i); it; ++it) {
      out << ' ' << (it.index() + 1) << ':' << format_double(it.value());
    }
    out << '\n';
  }
}

PrimalNorm parse_primal_norm(std::string_view name) {
  if (name == "l1") return PrimalNorm::L1;
  if (name == "l2") return PrimalNorm::L2;
  throw std::invalid_argument("unknown primal norm '" + std::string(name) + "'");
}

std::string_view to_string(PrimalNorm norm) noexcept { return norm == PrimalNorm::L1 ? "l1" : "l2"; }

Norm as_norm(PrimalNorm norm) noexcept { return norm == PrimalNorm::L1 ? Norm::L1 : Norm::L2; }

double feature_bound(const SparseMatrix& W, PrimalNorm norm) {
  double m = 0.0;
  for (Index i = 0; i < W.outerSize(); ++i) {
    double col = 0.0;
    for (SparseMatrix::InnerIterator it(W, i); it; ++it) {
      if (norm == PrimalNorm::L1) {
        col = std::max(col, std::abs(it.value()));
      } else {
        col += it.value() * it.value();
      }
    }
    if (norm == PrimalNorm::L2) col = std::sqrt(col);
    m = std::max(m, col);
  }
  return m;
}

Problem::Problem(LabeledData data, LossKind family, PrimalNorm norm)
    : W_(std::move(data.W)), y_(std::move(data.y)), family_(family), norm_(norm) {
  if (W_.cols() < 1 || W_.rows() < 1) {
    throw DimensionError("problem needs n >= 1 observations and p >= 1 features");
  }
  if (y_.size() != W_.cols()) {
    throw DimensionError("label count " + std::to_string(y_.size()) +
                         " does not match observation count " + std::to_string(W_.cols()));
  }
  W_.makeCompressed();
  for (Index k = 0; k < W_.nonZeros(); ++k) {
    if (!std::isfinite(W_.valuePtr()[k])) {
      throw DomainError("non-finite feature value");
    }
  }
  for (Index i = 0; i < y_.size(); ++i) {
    double& y = y_[i];
    if (family_ == LossKind::Logistic && y == 0.0) {
      y = -1.0;
      ++remapped_;
    } else if (family_ == LossKind::SigmoidSquared && y == -1.0) {
      y = 0.0;
      ++remapped_;
    }
    if (!label_valid(family_, y)) {
      throw DomainError("observation " + std::to_string(i) + ": invalid label " +
                        std::to_string(y) + " for loss family " + std::string(to_string(family_)));
    }
  }
  for (Index i = 0; i < W_.outerSize(); ++i) {
    const Index nnz = W_.outerIndexPtr()[i + 1] - W_.outerIndexPtr()[i];
    max_nnz_ = std::max(max_nnz_, nnz);
  }
  M_ = feature_bound(W_, norm_);
  const auto c = lipschitz_constants(family_);
  L_eff_ = c.L * M_ * M_;
  Lhat_eff_ = c.L_hat * M_ * M_ * M_;

  Fnv1a h;
  h.value(W_.rows());
  h.value(W_.cols());
  h.bytes(W_.outerIndexPtr(), sizeof(SparseMatrix::StorageIndex) * (W_.cols() + 1));
  h.bytes(W_.innerIndexPtr(), sizeof(SparseMatrix::StorageIndex) * W_.nonZeros());
  h.bytes(W_.valuePtr(), sizeof(double) * W_.nonZeros());
  h.bytes(y_.data(), sizeof(double) * y_.size());
  h.value(static_cast<int>(family_));
  fingerprint_ = h.digest();
}

Problem synth_problem(Index n, Index p, LossKind family, std::uint64_t seed, PrimalNorm norm) {
  if (n < 1 || p < 1) {
    throw DimensionError("synth_problem needs n >= 1 and p >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  Eigen::MatrixXd dense(p, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) dense(j, i) = normal(rng);
    const double len = dense.col(i).norm();
    if (len > 0.0) dense.col(i) /= len;
  }
  Vector planted(p);
  for (Index j = 0; j < p; ++j) planted[j] = normal(rng);

  LabeledData data;
  data.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double margin = dense.col(i).dot(planted);
    const double prob = 1.0 / (1.0 + std::exp(-margin));
    switch (family) {
      case LossKind::Quadratic:
        data.y[i] = margin + 0.1 * normal(rng);
        break;
      case LossKind::Logistic:
        data.y[i] = uniform(rng) < prob ? 1.0 : -1.0;
        break;
      case LossKind::SigmoidSquared:
        data.y[i] = uniform(rng) < prob ? 1.0 : 0.0;
        break;
    }
  }
  data.W = dense.sparseView(0.0, 0.0);
  data.W.makeCompressed();
  return Problem(std::move(data), family, norm);
}

}  // namespace tufw
