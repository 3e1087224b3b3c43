// NEON kernel variants for aarch64. NEON is architecturally guaranteed there,
// so no runtime CPU probe is needed beyond the compile-time check.
#include "npsc/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

namespace npsc::kernels {

namespace {

double v_dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double acc = vaddvq_f64(acc0) + vaddvq_f64(acc1);
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double v_dot3(const double* w, const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t p = vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vfmaq_f64(acc, vld1q_f64(w + i), p);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

double v_sum(const double* a, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(a + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}

void v_axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void v_scal(double alpha, double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void v_relu_affine(const double* x, double w, double b, double* psi, double* act,
                   std::size_t n) {
  const float64x2_t vw = vdupq_n_f64(w);
  const float64x2_t vb = vdupq_n_f64(b);
  const float64x2_t zero = vdupq_n_f64(0.0);
  const float64x2_t one = vdupq_n_f64(1.0);
  std::size_t i = 0;
  // mul + add rather than fma: bitwise identical to the scalar reference
  for (; i + 2 <= n; i += 2) {
    float64x2_t t = vaddq_f64(vmulq_f64(vw, vld1q_f64(x + i)), vb);
    uint64x2_t mask = vcgtq_f64(t, zero);
    vst1q_f64(psi + i, vreinterpretq_f64_u64(
                           vandq_u64(mask, vreinterpretq_u64_f64(t))));
    vst1q_f64(act + i, vreinterpretq_f64_u64(
                           vandq_u64(mask, vreinterpretq_u64_f64(one))));
  }
  for (; i < n; ++i) {
    const double t = w * x[i] + b;
    psi[i] = t > 0.0 ? t : 0.0;
    act[i] = t > 0.0 ? 1.0 : 0.0;
  }
}

void v_relu_split(const double* t, double* psi, double* act, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  const float64x2_t one = vdupq_n_f64(1.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t v = vld1q_f64(t + i);
    uint64x2_t mask = vcgtq_f64(v, zero);
    vst1q_f64(psi + i, vreinterpretq_f64_u64(
                           vandq_u64(mask, vreinterpretq_u64_f64(v))));
    vst1q_f64(act + i, vreinterpretq_f64_u64(
                           vandq_u64(mask, vreinterpretq_u64_f64(one))));
  }
  for (; i < n; ++i) {
    psi[i] = t[i] > 0.0 ? t[i] : 0.0;
    act[i] = t[i] > 0.0 ? 1.0 : 0.0;
  }
}

}  // namespace

const Ops* neon_ops() {
  static const Ops ops{"neon", v_dot, v_dot3, v_sum, v_axpy, v_scal,
                       v_relu_affine, v_relu_split};
  return &ops;
}

}  // namespace npsc::kernels

#else

namespace npsc::kernels {
const Ops* neon_ops() { return nullptr; }
}  // namespace npsc::kernels

#endif
