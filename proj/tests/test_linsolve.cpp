#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "npsc/linsolve.hpp"
#include "npsc/rng.hpp"

using namespace npsc;

namespace {

MatAction dense_action(const DenseMatrix& A) {
  return [&A](std::span<const double> in, std::span<double> out) {
    std::vector<double> y = matvec(A, in);
    std::copy(y.begin(), y.end(), out.begin());
  };
}

DenseMatrix random_spd(std::size_t m, RngStream& rng, double shift = 0.5) {
  DenseMatrix B(m, m);
  for (double& v : B.v) v = rng.uniform(-1, 1);
  DenseMatrix A(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < m; ++r) s += B(r, i) * B(r, j);
      A(i, j) = s + (i == j ? shift : 0.0);
    }
  return A;
}

}  // namespace

TEST_CASE("cg: identity converges in one iteration; zero rhs in zero") {
  DenseMatrix I = DenseMatrix::identity(6);
  std::vector<double> rhs{1, -2, 3, 0.5, 4, -1}, x(6, 0.0);
  SolveReport rep = cg(dense_action(I), rhs, x, 1e-10, 100);
  CHECK(rep.converged);
  CHECK(rep.iterations == 1);
  for (std::size_t i = 0; i < 6; ++i) CHECK(x[i] == doctest::Approx(rhs[i]));

  std::vector<double> zero(6, 0.0), x2(6, 0.0);
  rep = cg(dense_action(I), zero, x2, 1e-10, 100);
  CHECK(rep.converged);
  CHECK(rep.iterations == 0);
}

TEST_CASE("cg breakdown on an indefinite matrix") {
  DenseMatrix A = DenseMatrix::identity(2);
  A(1, 1) = -1.0;
  std::vector<double> rhs{0.0, 1.0}, x(2, 0.0);
  CHECK_THROWS_AS(cg(dense_action(A), rhs, x, 1e-10, 10), non_spd_error);
}

TEST_CASE("pcg with identity preconditioner produces the cg iterates") {
  RngStream rng(5);
  DenseMatrix A = random_spd(24, rng);
  std::vector<double> rhs(24);
  for (double& v : rhs) v = rng.normal();
  std::vector<double> x1(24, 0.0), x2(24, 0.0);
  MatAction ident = [](std::span<const double> in, std::span<double> out) {
    std::copy(in.begin(), in.end(), out.begin());
  };
  SolveReport r1 = cg(dense_action(A), rhs, x1, 1e-12, 200);
  SolveReport r2 = pcg(dense_action(A), ident, rhs, x2, 1e-12, 200);
  CHECK(r1.iterations == r2.iterations);
  for (std::size_t i = 0; i < 24; ++i) CHECK(x1[i] == doctest::Approx(x2[i]));
}

TEST_CASE("cg and pcg agree with the dense solver on SPD systems") {
  RngStream rng(17);
  for (std::size_t m : {std::size_t{8}, std::size_t{37}, std::size_t{128}}) {
    DenseMatrix A = random_spd(m, rng);
    std::vector<double> rhs(m);
    for (double& v : rhs) v = rng.normal();
    std::vector<double> xd = dense_solve(A, rhs);
    std::vector<double> xc(m, 0.0);
    cg(dense_action(A), rhs, xc, 1e-14, 10 * static_cast<int>(m));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      num += (xc[i] - xd[i]) * (xc[i] - xd[i]);
      den += xd[i] * xd[i];
    }
    CHECK(std::sqrt(num / den) <= 1e-8);
  }
}

TEST_CASE("thomas: identity, hand 3x3 and dense oracle") {
  TridiagonalMatrix I(4);
  I.diag = {1, 1, 1, 1};
  std::vector<double> rhs{4, 3, 2, 1};
  CHECK(thomas_solve(I, rhs) == rhs);

  TridiagonalMatrix T(3);
  T.diag = {2, 2, 2};
  T.lower = {-1, -1};
  T.upper = {-1, -1};
  std::vector<double> x = thomas_solve(T, std::vector<double>{1, 0, 1});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(1.0));
  CHECK(x[2] == doctest::Approx(1.0));

  RngStream rng(29);
  const std::size_t m = 100;
  TridiagonalMatrix R(m);
  for (std::size_t i = 0; i < m - 1; ++i) {
    R.lower[i] = rng.uniform(-1, 1);
    R.upper[i] = R.lower[i];
  }
  for (std::size_t i = 0; i < m; ++i) R.diag[i] = 2.5 + rng.uniform(0, 1);
  std::vector<double> b(m);
  for (double& v : b) v = rng.normal();
  std::vector<double> xt = thomas_solve(R, b);
  DenseMatrix D(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    D(i, i) = R.diag[i];
    if (i + 1 < m) {
      D(i, i + 1) = R.upper[i];
      D(i + 1, i) = R.lower[i];
    }
  }
  std::vector<double> xd = dense_solve(D, b);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    num += (xt[i] - xd[i]) * (xt[i] - xd[i]);
    den += xd[i] * xd[i];
  }
  CHECK(std::sqrt(num / den) <= 1e-12);

  TridiagonalMatrix Z(2);
  Z.diag = {1.0, 0.0};
  Z.upper = {0.0};
  Z.lower = {0.0};
  CHECK_THROWS_AS(thomas_solve(Z, std::vector<double>{1, 1}), degenerate_grid_error);
}

TEST_CASE("dense_solve: identity, diagonal and singular error") {
  DenseMatrix I = DenseMatrix::identity(3);
  std::vector<double> x = dense_solve(I, std::vector<double>{1, 2, 3});
  CHECK(x == std::vector<double>{1, 2, 3});

  DenseMatrix D(2, 2);
  D(0, 0) = 2.0;
  D(1, 1) = 4.0;
  x = dense_solve(D, std::vector<double>{2, 8});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));

  DenseMatrix S(2, 2);
  S(0, 0) = 1.0;
  S(0, 1) = 1.0;
  S(1, 0) = 1.0;
  S(1, 1) = 1.0;
  CHECK_THROWS_AS(dense_solve(S, std::vector<double>{1, 2}), singular_matrix_error);
}

TEST_CASE("dense_lstsq beats random candidates on a rank-deficient system") {
  RngStream rng(31);
  const std::size_t rows = 12, cols = 4;
  DenseMatrix A(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    A(r, 0) = rng.normal();
    A(r, 1) = rng.normal();
    A(r, 2) = A(r, 0) + A(r, 1);  // exactly dependent column
    A(r, 3) = rng.normal();
  }
  std::vector<double> rhs(rows);
  for (double& v : rhs) v = rng.normal();
  std::vector<double> x = dense_lstsq(A, rhs);
  auto residual = [&](const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      double e = -rhs[r];
      for (std::size_t j = 0; j < cols; ++j) e += A(r, j) * c[j];
      s += e * e;
    }
    return s;
  };
  const double best = residual(x);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> c(cols);
    for (double& v : c) v = rng.normal();
    CHECK(best <= residual(c) + 1e-12);
  }
}

TEST_CASE("condition_number: identity, diagonal, and growth of the demo matrix") {
  CHECK(condition_number(DenseMatrix::identity(5)) == doctest::Approx(1.0));
  DenseMatrix D = DenseMatrix::identity(2);
  D(1, 1) = 100.0;
  CHECK(condition_number(D) == doctest::Approx(100.0));

  DenseMatrix NS(2, 2);
  NS(0, 1) = 1.0;
  CHECK_THROWS_AS(condition_number(NS), std::invalid_argument);
}

TEST_CASE("symmetric_eigenvalues on a known 2x2") {
  DenseMatrix A(2, 2);
  A(0, 0) = 2.0;
  A(1, 1) = 2.0;
  A(0, 1) = 1.0;
  A(1, 0) = 1.0;
  std::vector<double> eig = symmetric_eigenvalues(A);
  CHECK(eig[0] == doctest::Approx(1.0));
  CHECK(eig[1] == doctest::Approx(3.0));
}
