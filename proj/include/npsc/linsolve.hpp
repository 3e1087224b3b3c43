#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "npsc/common.hpp"

namespace npsc {

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  static DenseMatrix identity(std::size_t m);

  double& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

std::vector<double> matvec(const DenseMatrix& A, std::span<const double> x);

struct SolveReport {
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};

/// Action of a matrix (or preconditioner) on a vector: out = M * in.
using MatAction = std::function<void(std::span<const double> in, std::span<double> out)>;

/// Conjugate gradients for SPD actions. x holds the initial guess on entry and
/// the solution on exit. Stops when ||r_k|| / ||r_0|| < tol (zero guess makes
/// the denominator ||rhs||). Throws non_spd_error on p.Kp <= 0 breakdown.
SolveReport cg(const MatAction& apply_K, std::span<const double> rhs,
               std::span<double> x, double tol, int max_iter);

/// Preconditioned CG with the same stopping rule; apply_P must be SPD.
SolveReport pcg(const MatAction& apply_K, const MatAction& apply_P,
                std::span<const double> rhs, std::span<double> x, double tol,
                int max_iter);

struct TridiagonalMatrix {
  std::vector<double> lower;  // m-1
  std::vector<double> diag;   // m
  std::vector<double> upper;  // m-1

  explicit TridiagonalMatrix(std::size_t m = 0)
      : lower(m > 0 ? m - 1 : 0, 0.0), diag(m, 0.0), upper(m > 0 ? m - 1 : 0, 0.0) {}
  std::size_t size() const { return diag.size(); }
  std::vector<double> apply(std::span<const double> x) const;
};

/// Prefactored Thomas solve; factor once, apply O(m) per right-hand side.
struct TridiagonalFactor {
  std::vector<double> diag_inv;  // 1 / pivot
  std::vector<double> lower_ratio;
  std::vector<double> upper;

  static TridiagonalFactor of(const TridiagonalMatrix& T, double pivot_tol = 1e-14);
  void solve(std::span<const double> rhs, std::span<double> x) const;
  std::size_t size() const { return diag_inv.size(); }
};

std::vector<double> thomas_solve(const TridiagonalMatrix& T, std::span<const double> rhs);

/// Gaussian elimination with partial pivoting; throws singular_matrix_error.
std::vector<double> dense_solve(DenseMatrix A, std::vector<double> rhs);

/// Least squares through the normal equations. Singular systems fall back to a
/// ridge of 1e-12 * trace(AtA)/m; never throws.
std::vector<double> dense_lstsq(const DenseMatrix& A, std::span<const double> rhs);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
std::vector<double> symmetric_eigenvalues(DenseMatrix A, double tol = 1e-13,
                                          int max_sweeps = 64);

/// lambda_max / lambda_min of an SPD matrix (dense diagnostic path, m <= 2048).
double condition_number(const DenseMatrix& K);

}  // namespace npsc
