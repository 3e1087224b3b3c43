#pragma once

#include <cstddef>

// Data-parallel inner loops shared by quadrature sums, Gram-matrix assembly
// and network evaluation. A scalar reference implementation always exists;
// AVX2 (x86-64) and NEON (aarch64) variants are selected once at runtime and
// are equivalence-tested against the scalar path.
//
// Accumulation order differs between backends, so results agree to rounding,
// not bitwise. Backend selection is deterministic on a given machine, and so
// are all results produced through these entry points.

namespace npsc::kernels {

struct Ops {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*dot3)(const double* w, const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*scal)(double alpha, double* x, std::size_t n);
  // psi[q] = max(0, w*x[q] + b), act[q] = 1 if w*x[q] + b > 0 else 0.
  // act is the ReLU derivative sample with the convention sigma'(0) = 0.
  void (*relu_affine)(const double* x, double w, double b, double* psi,
                      double* act, std::size_t n);
  // psi[q] = max(0, t[q]), act[q] = 1 if t[q] > 0 else 0.
  void (*relu_split)(const double* t, double* psi, double* act, std::size_t n);
};

const Ops& scalar_ops();

/// Table in use; picked on first call (env NPSC_KERNELS overrides autodetect).
const Ops& active_ops();

/// Force a backend by name: "scalar", "avx2", "neon" or "auto".
/// Returns false if the backend is unavailable on this machine.
bool select_backend(const char* name);

inline double dot(const double* a, const double* b, std::size_t n) {
  return active_ops().dot(a, b, n);
}
inline double dot3(const double* w, const double* a, const double* b, std::size_t n) {
  return active_ops().dot3(w, a, b, n);
}
inline double sum(const double* a, std::size_t n) { return active_ops().sum(a, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active_ops().axpy(alpha, x, y, n);
}
inline void scal(double alpha, double* x, std::size_t n) { active_ops().scal(alpha, x, n); }
inline void relu_affine(const double* x, double w, double b, double* psi,
                        double* act, std::size_t n) {
  active_ops().relu_affine(x, w, b, psi, act, n);
}
inline void relu_split(const double* t, double* psi, double* act, std::size_t n) {
  active_ops().relu_split(t, psi, act, n);
}

}  // namespace npsc::kernels
