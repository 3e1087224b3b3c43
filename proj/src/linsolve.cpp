#include "npsc/linsolve.hpp"

#include <algorithm>
#include <cmath>

#include "npsc/kernels.hpp"

namespace npsc {

namespace {

double norm2(std::span<const double> v) {
  return std::sqrt(kernels::dot(v.data(), v.data(), v.size()));
}

}  // namespace

DenseMatrix DenseMatrix::identity(std::size_t m) {
  DenseMatrix I(m, m);
  for (std::size_t i = 0; i < m; ++i) I(i, i) = 1.0;
  return I;
}

std::vector<double> matvec(const DenseMatrix& A, std::span<const double> x) {
  require(x.size() == A.cols, "matvec: size mismatch");
  std::vector<double> y(A.rows, 0.0);
  for (std::size_t i = 0; i < A.rows; ++i)
    y[i] = kernels::dot(A.v.data() + i * A.cols, x.data(), A.cols);
  return y;
}

SolveReport pcg(const MatAction& apply_K, const MatAction& apply_P,
                std::span<const double> rhs, std::span<double> x, double tol,
                int max_iter) {
  const std::size_t m = rhs.size();
  require(x.size() == m, "pcg: size mismatch");
  std::vector<double> r(m), z(m), p(m), Kp(m);

  apply_K(x, Kp);
  for (std::size_t i = 0; i < m; ++i) r[i] = rhs[i] - Kp[i];
  const double r0 = norm2(r);
  SolveReport report;
  if (r0 == 0.0) {
    report.converged = true;
    return report;
  }

  apply_P(r, z);
  std::copy(z.begin(), z.end(), p.begin());
  double rz = kernels::dot(r.data(), z.data(), m);

  for (int k = 0; k < max_iter; ++k) {
    apply_K(p, Kp);
    const double pKp = kernels::dot(p.data(), Kp.data(), m);
    if (!(pKp > 0.0))
      throw non_spd_error("pcg: non-positive curvature direction");
    const double alpha = rz / pKp;
    kernels::axpy(alpha, p.data(), x.data(), m);
    kernels::axpy(-alpha, Kp.data(), r.data(), m);
    report.iterations = k + 1;
    report.rel_residual = norm2(r) / r0;
    if (report.rel_residual < tol) {
      report.converged = true;
      return report;
    }
    apply_P(r, z);
    const double rz_new = kernels::dot(r.data(), z.data(), m);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < m; ++i) p[i] = z[i] + beta * p[i];
  }
  report.rel_residual = norm2(r) / r0;
  report.converged = report.rel_residual < tol;
  return report;
}

SolveReport cg(const MatAction& apply_K, std::span<const double> rhs,
               std::span<double> x, double tol, int max_iter) {
  static const MatAction ident = [](std::span<const double> in, std::span<double> out) {
    std::copy(in.begin(), in.end(), out.begin());
  };
  return pcg(apply_K, ident, rhs, x, tol, max_iter);
}

std::vector<double> TridiagonalMatrix::apply(std::span<const double> x) const {
  const std::size_t m = size();
  require(x.size() == m, "TridiagonalMatrix::apply: size mismatch");
  std::vector<double> y(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double s = diag[i] * x[i];
    if (i > 0) s += lower[i - 1] * x[i - 1];
    if (i + 1 < m) s += upper[i] * x[i + 1];
    y[i] = s;
  }
  return y;
}

TridiagonalFactor TridiagonalFactor::of(const TridiagonalMatrix& T, double pivot_tol) {
  const std::size_t m = T.size();
  require(m >= 1, "TridiagonalFactor: empty matrix");
  double scale = 0.0;
  for (double v : T.diag) scale = std::max(scale, std::abs(v));
  TridiagonalFactor F;
  F.diag_inv.resize(m);
  F.lower_ratio.resize(m > 0 ? m - 1 : 0);
  F.upper = T.upper;
  double pivot = T.diag[0];
  for (std::size_t i = 0;;) {
    if (!(std::abs(pivot) > pivot_tol * scale))
      throw degenerate_grid_error("thomas: pivot below threshold");
    F.diag_inv[i] = 1.0 / pivot;
    if (++i == m) break;
    const double l = T.lower[i - 1] * F.diag_inv[i - 1];
    F.lower_ratio[i - 1] = l;
    pivot = T.diag[i] - l * T.upper[i - 1];
  }
  return F;
}

void TridiagonalFactor::solve(std::span<const double> rhs, std::span<double> x) const {
  const std::size_t m = size();
  require(rhs.size() == m && x.size() == m, "TridiagonalFactor::solve: size mismatch");
  // forward sweep
  x[0] = rhs[0];
  for (std::size_t i = 1; i < m; ++i) x[i] = rhs[i] - lower_ratio[i - 1] * x[i - 1];
  // back substitution
  x[m - 1] *= diag_inv[m - 1];
  for (std::size_t i = m - 1; i-- > 0;)
    x[i] = (x[i] - upper[i] * x[i + 1]) * diag_inv[i];
}

std::vector<double> thomas_solve(const TridiagonalMatrix& T, std::span<const double> rhs) {
  TridiagonalFactor F = TridiagonalFactor::of(T);
  std::vector<double> x(T.size());
  F.solve(rhs, x);
  return x;
}

std::vector<double> dense_solve(DenseMatrix A, std::vector<double> rhs) {
  require(A.rows == A.cols, "dense_solve: matrix not square");
  require(rhs.size() == A.rows, "dense_solve: rhs size mismatch");
  const std::size_t m = A.rows;
  double scale = 0.0;
  for (double v : A.v) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) throw singular_matrix_error("dense_solve: zero matrix");

  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < m; ++i)
      if (std::abs(A(i, col)) > std::abs(A(piv, col))) piv = i;
    if (!(std::abs(A(piv, col)) > 1e-300 + 1e-15 * scale))
      throw singular_matrix_error("dense_solve: singular to working precision");
    if (piv != col) {
      for (std::size_t j = col; j < m; ++j) std::swap(A(piv, j), A(col, j));
      std::swap(rhs[piv], rhs[col]);
    }
    const double inv = 1.0 / A(col, col);
    for (std::size_t i = col + 1; i < m; ++i) {
      const double f = A(i, col) * inv;
      if (f == 0.0) continue;
      for (std::size_t j = col + 1; j < m; ++j) A(i, j) -= f * A(col, j);
      rhs[i] -= f * rhs[col];
    }
  }
  std::vector<double> x(m);
  for (std::size_t i = m; i-- > 0;) {
    double s = rhs[i];
    for (std::size_t j = i + 1; j < m; ++j) s -= A(i, j) * x[j];
    x[i] = s / A(i, i);
  }
  return x;
}

std::vector<double> dense_lstsq(const DenseMatrix& A, std::span<const double> rhs) {
  require(rhs.size() == A.rows, "dense_lstsq: rhs size mismatch");
  const std::size_t m = A.cols;
  DenseMatrix N(m, m);
  std::vector<double> b(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < A.rows; ++r) s += A(r, i) * A(r, j);
      N(i, j) = s;
      N(j, i) = s;
    }
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t r = 0; r < A.rows; ++r) s += A(r, i) * rhs[r];
    b[i] = s;
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < m; ++i) trace += N(i, i);
  if (trace == 0.0) return std::vector<double>(m, 0.0);
  try {
    return dense_solve(N, b);
  } catch (const singular_matrix_error&) {
    const double ridge = 1e-12 * trace / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) N(i, i) += ridge;
    return dense_solve(std::move(N), std::move(b));
  }
}

std::vector<double> symmetric_eigenvalues(DenseMatrix A, double tol, int max_sweeps) {
  require(A.rows == A.cols, "symmetric_eigenvalues: matrix not square");
  const std::size_t m = A.rows;
  double scale = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) scale = std::max(scale, std::abs(A(i, j)));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      require(std::abs(A(i, j) - A(j, i)) <= 1e-12 * std::max(scale, 1e-300),
              "symmetric_eigenvalues: matrix not symmetric");
  if (scale == 0.0) return std::vector<double>(m, 0.0);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) off = std::max(off, std::abs(A(i, j)));
    if (off <= tol * scale) break;
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t q = p + 1; q < m; ++q) {
        const double apq = A(p, q);
        if (std::abs(apq) <= 0.1 * tol * scale) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < m; ++k) {
          const double akp = A(k, p);
          const double akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double apk = A(p, k);
          const double aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> eig(m);
  for (std::size_t i = 0; i < m; ++i) eig[i] = A(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

double condition_number(const DenseMatrix& K) {
  require(K.rows == K.cols, "condition_number: matrix not square");
  require(K.rows <= 2048, "condition_number: dense path limited to m <= 2048");
  std::vector<double> eig = symmetric_eigenvalues(K);
  return eig.back() / eig.front();
}

}  // namespace npsc
