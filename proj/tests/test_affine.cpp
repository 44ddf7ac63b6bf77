#include <doctest.h>

#include <random>

#include "csls/affine.hpp"
#include "fixtures.hpp"

using namespace csls;

TEST_SUITE_BEGIN("affine");

TEST_CASE("variable space packs symmetric variables lower-triangular") {
  VariableSpace vs;
  const MatrixVariable& X = vs.add_symmetric("X", 3);
  const MatrixVariable& F = vs.add_full("F", 2, 3);
  const MatrixVariable& s = vs.add_scalar("s");
  CHECK(X.count() == 6);
  CHECK(F.count() == 6);
  CHECK(s.count() == 1);
  CHECK(vs.size() == 13);
  // Column-major lower triangle: (0,0),(1,0),(2,0),(1,1),(2,1),(2,2).
  CHECK(X.entry_id(0, 0) == 0);
  CHECK(X.entry_id(1, 0) == 1);
  CHECK(X.entry_id(2, 0) == 2);
  CHECK(X.entry_id(1, 1) == 3);
  CHECK(X.entry_id(2, 1) == 4);
  CHECK(X.entry_id(2, 2) == 5);
  CHECK(X.entry_id(1, 2) == X.entry_id(2, 1));
  CHECK(X.off_diagonal(1));
  CHECK_FALSE(X.off_diagonal(3));
  CHECK(F.entry_id(1, 2) == X.count() + 2 * 2 + 1);
  CHECK(s.offset == 12);
  CHECK_THROWS_AS(vs.add_scalar("X"), std::logic_error);
  CHECK_THROWS_AS((void)vs.at("nope"), std::out_of_range);

  VectorXd x = VectorXd::Zero(vs.size());
  MatrixXd val(3, 3);
  val << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  vs.assign(x, X, val);
  CHECK(vs.value(x, X) == val);
  CHECK(x[X.entry_id(2, 1)] == 5);
  MatrixXd bad = val;
  bad(0, 1) += 1.0;
  CHECK_THROWS(vs.assign(x, X, bad));
}

TEST_CASE("affine maps are linear between any two points") {
  std::mt19937_64 rng(7);
  VariableSpace vs;
  const MatrixVariable& X = vs.add_symmetric("X", 2);
  const MatrixVariable& Z = vs.add_full("Z", 1, 2);
  MatrixXd A = fx::random_matrix(rng, 2, 2);
  MatrixXd Bu = fx::random_matrix(rng, 2, 1);
  AffineMatrix e = AffineMatrix::fixed(A) * var(X) +
                   AffineMatrix::fixed(Bu) * var(Z) -
                   AffineMatrix::fixed(MatrixXd::Identity(2, 2));
  std::normal_distribution<double> dist;
  VectorXd x0(vs.size()), x1(vs.size());
  for (int i = 0; i < vs.size(); ++i) {
    x0[i] = dist(rng);
    x1[i] = dist(rng);
  }
  for (double a : {0.0, 0.3, 1.0, -2.5}) {
    MatrixXd lhs = e.eval(a * x0 + (1 - a) * x1);
    MatrixXd rhs = a * e.eval(x0) + (1 - a) * e.eval(x1);
    CHECK(max_abs(lhs - rhs) < 1e-12);
  }
  // The map matches its definition at a concrete point.
  MatrixXd Xv = vs.value(x0, X), Zv = vs.value(x0, Z);
  CHECK(max_abs(e.eval(x0) - (A * Xv + Bu * Zv - MatrixXd::Identity(2, 2))) <
        1e-14);
}

TEST_CASE("products of two variable expressions are rejected") {
  VariableSpace vs;
  const MatrixVariable& X = vs.add_symmetric("X", 2);
  const MatrixVariable& G = vs.add_full("G", 2, 2);
  CHECK_THROWS_AS(var(X) * var(G), std::logic_error);
  CHECK_NOTHROW(AffineMatrix::fixed(MatrixXd::Identity(2, 2)) * var(X));
  CHECK_NOTHROW(var(X) * AffineMatrix::fixed(MatrixXd::Identity(2, 2)));
  // Associativity does not launder nonlinearity: X * I is still variable.
  CHECK_THROWS_AS(var(X) * AffineMatrix::fixed(MatrixXd::Identity(2, 2)) *
                      var(G).transpose(),
                  std::logic_error);
}

TEST_CASE("congruence equals the explicit triple product") {
  std::mt19937_64 rng(3);
  VariableSpace vs;
  const MatrixVariable& P = vs.add_symmetric("P", 3);
  MatrixXd N = fx::random_matrix(rng, 3, 2);
  AffineMatrix c = congruence(N, var(P));
  VectorXd x(vs.size());
  for (int i = 0; i < x.size(); ++i) x[i] = 0.1 * (i + 1);
  MatrixXd Pv = vs.value(x, P);
  CHECK(max_abs(c.eval(x) - N.transpose() * Pv * N) < 1e-13);
  CHECK_THROWS(congruence(fx::random_matrix(rng, 2, 2), var(P)));
}

TEST_CASE("block placement accumulates and respects bounds") {
  VariableSpace vs;
  const MatrixVariable& X = vs.add_symmetric("X", 2);
  AffineMatrix M = AffineMatrix::zero(3, 3);
  M.add_block(0, 0, var(X));
  M.add_block(1, 1, var(X));  // overlaps (1,1)
  VectorXd x = VectorXd::Zero(vs.size());
  MatrixXd Xv(2, 2);
  Xv << 1, 2, 2, 5;
  vs.assign(x, X, Xv);
  MatrixXd got = M.eval(x);
  CHECK(got(1, 1) == 5 + 1);
  CHECK(got(0, 1) == 2);
  CHECK(got(2, 2) == 5);
  CHECK_THROWS_AS(M.add_block(2, 2, var(X)), std::out_of_range);
}

TEST_CASE("blocks verify symmetry and report margins net of strictness") {
  VariableSpace vs;
  const MatrixVariable& X = vs.add_symmetric("X", 1);
  // A^T X A - X for A = 0.5, evaluated at X = 1, must sit 0.75 inside the
  // negative cone before the strictness shift.
  AffineMatrix e = AffineMatrix::term(X.offset, MatrixXd::Constant(1, 1, 0.25)) -
                   var(X);
  LmiBlock b = make_block(e, Sense::neg_def, "decrease");
  VectorXd x = VectorXd::Ones(1);
  const double eps = strictness_epsilon(b);
  CHECK(eps == doctest::Approx(1e-7 * (1 + 0.75)).epsilon(1e-12));
  CHECK(block_margin(b, x) == doctest::Approx(0.75 - eps).epsilon(1e-12));
  LmiBlock semi = make_block(e, Sense::neg_semi, "decrease");
  CHECK(block_margin(semi, x) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(block_margin(LmiBlock{e, Sense::pos_def, "wrong"}, x) < 0);

  MatrixXd skew(2, 2);
  skew << 0, 1, -1, 0;
  CHECK_THROWS_AS(make_block(AffineMatrix::fixed(skew), Sense::pos_def, "skew"),
                  std::logic_error);
  CHECK_THROWS_AS(
      make_block(AffineMatrix::fixed(MatrixXd::Zero(2, 3)), Sense::pos_def,
                 "rect"),
      std::logic_error);
}

TEST_SUITE_END();
