#include "tufw/dataset.hpp"

#include <doctest.h>

#include <sstream>

using namespace tufw;

namespace {

LabeledData parse(const std::string& text, std::optional<Index> dims = std::nullopt) {
  std::istringstream in(text);
  return parse_libsvm(in, dims);
}

std::size_t error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

LabeledData two_columns() {
  Eigen::MatrixXd dense(2, 2);
  dense << 1.0, 0.0, 0.0, -3.0;
  return {dense.sparseView(), Vector::Ones(2)};
}

}  // namespace

TEST_CASE("single line parses into one sparse column") {
  const auto d = parse("1 3:0.5 7:-2\n");
  REQUIRE(d.W.cols() == 1);
  CHECK(d.W.rows() == 7);
  CHECK(d.W.nonZeros() == 2);
  CHECK(d.y[0] == 1.0);
  CHECK(d.W.coeff(2, 0) == 0.5);
  CHECK(d.W.coeff(6, 0) == -2.0);
}

TEST_CASE("labels, comments, blank lines and explicit signs") {
  const auto d = parse("# header\n+1 1:1\n\n-1 2:2.5e-1 # trailing\n0\n");
  REQUIRE(d.W.cols() == 3);
  CHECK(d.y[0] == 1.0);
  CHECK(d.y[1] == -1.0);
  CHECK(d.y[2] == 0.0);
  CHECK(d.W.coeff(1, 1) == 0.25);
  CHECK(d.W.col(2).nonZeros() == 0);
}

TEST_CASE("dims override") {
  CHECK(parse("1 2:1\n", Index{10}).W.rows() == 10);
  CHECK_THROWS_AS(parse("1 5:1\n", Index{3}), ParseError);
}

TEST_CASE("parse errors carry the line number") {
  CHECK(error_line("1 1:1\n1 2:x\n") == 2);
  CHECK(error_line("1 1:1\n1 3:1 2:1\n") == 2);
  CHECK(error_line("1 2:1 2:1\n") == 1);
  CHECK(error_line("1 0:1\n") == 1);
  CHECK(error_line("abc 1:1\n") == 1);
  CHECK(error_line("1 1:1\n\n1 11\n") == 3);
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("# only a comment\n\n"), ParseError);
}

TEST_CASE("write then parse reproduces the data exactly") {
  const auto d = parse("1 1:0.1 4:-3.25\n-1 2:1e-300 3:123456789.125\n1\n");
  std::ostringstream out;
  write_libsvm(out, d);
  const auto back = parse(out.str(), d.W.rows());
  CHECK(back.W.rows() == d.W.rows());
  CHECK(Eigen::MatrixXd(back.W) == Eigen::MatrixXd(d.W));
  CHECK(back.y == d.y);
  std::ostringstream again;
  write_libsvm(again, back);
  CHECK(again.str() == out.str());
}

TEST_CASE("missing file") { CHECK_THROWS(load_libsvm("/nonexistent/tufw/data.txt")); }

TEST_CASE("feature bound") {
  const auto d = two_columns();
  CHECK(feature_bound(d.W, PrimalNorm::L1) == 3.0);
  CHECK(feature_bound(d.W, PrimalNorm::L2) == 3.0);
  CHECK(feature_bound(SparseMatrix(4, 3), PrimalNorm::L1) == 0.0);

  Eigen::MatrixXd m(2, 2);
  m << 3.0, 1.0, 4.0, 1.0;
  const SparseMatrix W = m.sparseView();
  CHECK(feature_bound(W, PrimalNorm::L1) == 4.0);
  CHECK(feature_bound(W, PrimalNorm::L2) == 5.0);
}

TEST_CASE("problem constants scale with M") {
  const Problem prob(two_columns(), LossKind::Logistic, PrimalNorm::L1);
  CHECK(prob.M() == 3.0);
  CHECK(prob.L_eff() == doctest::Approx(0.25 * 9.0));
  CHECK(prob.Lhat_eff() == doctest::Approx(27.0 / (6.0 * std::sqrt(3.0))));
  CHECK(prob.max_column_nnz() == 1);
}

TEST_CASE("labels are remapped to the family convention") {
  auto d = two_columns();
  d.y << 0.0, 1.0;
  const Problem logistic(d, LossKind::Logistic);
  CHECK(logistic.y()[0] == -1.0);
  CHECK(logistic.labels_remapped() == 1);
  d.y << -1.0, 1.0;
  const Problem sig(d, LossKind::SigmoidSquared);
  CHECK(sig.y()[0] == 0.0);
  CHECK(sig.labels_remapped() == 1);
  d.y << 2.0, 1.0;
  CHECK_THROWS_AS(Problem(d, LossKind::Logistic), DomainError);
  CHECK_NOTHROW(Problem(d, LossKind::Quadratic));
}

TEST_CASE("problem validation") {
  auto d = two_columns();
  d.y = Vector::Ones(3);
  CHECK_THROWS_AS(Problem(d, LossKind::Quadratic), DimensionError);
}

TEST_CASE("synthetic problems are deterministic") {
  const auto a = synth_problem(4, 2, LossKind::Logistic, 7);
  const auto b = synth_problem(4, 2, LossKind::Logistic, 7);
  CHECK(Eigen::MatrixXd(a.W()) == Eigen::MatrixXd(b.W()));
  CHECK(a.y() == b.y());
  CHECK(a.fingerprint() == b.fingerprint());
  const auto c = synth_problem(4, 2, LossKind::Logistic, 8);
  CHECK(a.fingerprint() != c.fingerprint());
}

TEST_CASE("synthetic shapes and feature bound") {
  const auto one = synth_problem(1, 1, LossKind::Quadratic, 0);
  CHECK(one.n() == 1);
  CHECK(one.p() == 1);
  CHECK(one.M() == std::abs(one.W().coeff(0, 0)));

  const auto p = synth_problem(100, 5, LossKind::Logistic, 1);
  double direct = 0.0;
  const Eigen::MatrixXd W = p.W();
  for (Index i = 0; i < W.cols(); ++i) {
    direct = std::max(direct, W.col(i).cwiseAbs().maxCoeff());
    CHECK(W.col(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(p.M() == direct);
  CHECK(p.M() <= 1.0);
  for (Index i = 0; i < p.n(); ++i) CHECK(label_valid(LossKind::Logistic, p.y()[i]));

  const auto s = synth_problem(50, 3, LossKind::SigmoidSquared, 2);
  for (Index i = 0; i < s.n(); ++i) CHECK(label_valid(LossKind::SigmoidSquared, s.y()[i]));
}

TEST_CASE("norm names") {
  CHECK(parse_primal_norm("l1") == PrimalNorm::L1);
  CHECK(parse_primal_norm("l2") == PrimalNorm::L2);
  CHECK_THROWS(parse_primal_norm("linf"));
}
