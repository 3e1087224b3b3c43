#include "npsc/model.hpp"

#include <cmath>

namespace npsc {

void NetworkParams::validate() const {
  require(n > 0 && d > 0, "NetworkParams: n and d must be positive");
  require(a.size() == static_cast<std::size_t>(n), "NetworkParams: |a| != n");
  require(b.size() == static_cast<std::size_t>(n), "NetworkParams: |b| != n");
  require(omega.size() == static_cast<std::size_t>(n) * d,
          "NetworkParams: |omega| != n*d");
}

BoxDomain BoxDomain::unit(int d) {
  BoxDomain box;
  box.d = d;
  box.lower.assign(d, 0.0);
  box.upper.assign(d, 1.0);
  return box;
}

double BoxDomain::volume() const {
  double v = 1.0;
  for (int k = 0; k < d; ++k) v *= upper[k] - lower[k];
  return v;
}

void BoxDomain::vertex(unsigned mask, std::span<double> out) const {
  for (int k = 0; k < d; ++k)
    out[k] = (mask >> k) & 1u ? upper[k] : lower[k];
}

void BoxDomain::validate() const {
  require(d > 0, "BoxDomain: d must be positive");
  require(lower.size() == static_cast<std::size_t>(d) &&
              upper.size() == static_cast<std::size_t>(d),
          "BoxDomain: bound lengths != d");
  for (int k = 0; k < d; ++k)
    require(lower[k] < upper[k], "BoxDomain: lower >= upper");
}

std::vector<double> pack_params(const NetworkParams& p) {
  const SubspaceSplit s = SubspaceSplit::of(p.n, p.d);
  std::vector<double> packed(s.total());
  for (int i = 0; i < p.n; ++i) packed[i] = p.a[i];
  for (std::size_t j = 0; j < p.omega.size(); ++j) packed[p.n + j] = p.omega[j];
  for (int i = 0; i < p.n; ++i) packed[s.b_index(i)] = p.b[i];
  return packed;
}

NetworkParams unpack_params(std::span<const double> packed, int n, int d) {
  const SubspaceSplit s = SubspaceSplit::of(n, d);
  require(packed.size() == s.total(), "unpack_params: bad packed length");
  NetworkParams p(n, d);
  for (int i = 0; i < n; ++i) p.a[i] = packed[i];
  for (std::size_t j = 0; j < p.omega.size(); ++j) p.omega[j] = packed[n + j];
  for (int i = 0; i < n; ++i) p.b[i] = packed[s.b_index(i)];
  return p;
}

double evaluate(const NetworkParams& p, std::span<const double> x) {
  require(x.size() == static_cast<std::size_t>(p.d), "evaluate: dim mismatch");
  double u = 0.0;
  const double* w = p.omega.data();
  for (int i = 0; i < p.n; ++i, w += p.d) {
    double t = p.b[i];
    for (int k = 0; k < p.d; ++k) t += w[k] * x[k];
    if (t > 0.0) u += p.a[i] * t;
  }
  return u;
}

void evaluate_gradient_x(const NetworkParams& p, std::span<const double> x,
                         std::span<double> grad_out) {
  require(x.size() == static_cast<std::size_t>(p.d), "evaluate_gradient_x: dim mismatch");
  require(grad_out.size() == static_cast<std::size_t>(p.d),
          "evaluate_gradient_x: bad output length");
  for (int k = 0; k < p.d; ++k) grad_out[k] = 0.0;
  const double* w = p.omega.data();
  for (int i = 0; i < p.n; ++i, w += p.d) {
    double t = p.b[i];
    for (int k = 0; k < p.d; ++k) t += w[k] * x[k];
    if (t > 0.0)
      for (int k = 0; k < p.d; ++k) grad_out[k] += p.a[i] * w[k];
  }
}

double nodal_point(double omega_i, double b_i) {
  if (omega_i == 0.0)
    throw degenerate_neuron_error("nodal_point: omega = 0 has no kink");
  return -b_i / omega_i;
}

}  // namespace npsc
