#include "npsc/kernels.hpp"

namespace npsc::kernels {

namespace {

double s_dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double s_dot3(const double* w, const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += w[i] * a[i] * b[i];
  return acc;
}

double s_sum(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

void s_axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void s_scal(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void s_relu_affine(const double* x, double w, double b, double* psi, double* act,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double t = w * x[i] + b;
    psi[i] = t > 0.0 ? t : 0.0;
    act[i] = t > 0.0 ? 1.0 : 0.0;
  }
}

void s_relu_split(const double* t, double* psi, double* act, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    psi[i] = t[i] > 0.0 ? t[i] : 0.0;
    act[i] = t[i] > 0.0 ? 1.0 : 0.0;
  }
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops{"scalar", s_dot, s_dot3, s_sum, s_axpy, s_scal,
                       s_relu_affine, s_relu_split};
  return ops;
}

}  // namespace npsc::kernels
