#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "npsc/common.hpp"

namespace npsc {

/// Parameters of a width-n shallow ReLU network u(x) = sum_i a_i relu(w_i.x + b_i).
/// a is the linear (outer) layer; (omega, b) form the nonlinear layer.
struct NetworkParams {
  int n = 0;
  int d = 0;
  std::vector<double> a;      // n
  std::vector<double> omega;  // n rows of length d, row-major
  std::vector<double> b;      // n

  NetworkParams() = default;
  NetworkParams(int n_, int d_)
      : n(n_), d(d_), a(static_cast<std::size_t>(n_), 0.0),
        omega(static_cast<std::size_t>(n_) * static_cast<std::size_t>(d_), 0.0),
        b(static_cast<std::size_t>(n_), 0.0) {
    require(n_ > 0 && d_ > 0, "NetworkParams: n and d must be positive");
  }

  std::span<const double> omega_row(int i) const {
    return {omega.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)};
  }
  std::span<double> omega_row(int i) {
    return {omega.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)};
  }

  void validate() const;
};

struct BoxDomain {
  int d = 1;
  std::vector<double> lower;
  std::vector<double> upper;

  static BoxDomain unit(int d);
  double volume() const;
  /// Vertex selected by bit mask (bit k set = upper bound in coordinate k).
  void vertex(unsigned mask, std::span<double> out) const;
  void validate() const;
};

/// Index ranges of the a-block and the per-neuron (omega_i, b_i) blocks inside
/// the packed parameter vector (a | omega row-major | b) of length (d+2)n.
struct SubspaceSplit {
  int n = 0;
  int d = 0;

  static SubspaceSplit of(int n, int d) { return {n, d}; }

  std::size_t total() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(d + 2);
  }
  std::size_t a_begin() const { return 0; }
  std::size_t a_end() const { return static_cast<std::size_t>(n); }
  std::size_t omega_begin(int i) const {
    return static_cast<std::size_t>(n) + static_cast<std::size_t>(i) * d;
  }
  std::size_t omega_end(int i) const { return omega_begin(i) + d; }
  std::size_t b_index(int i) const {
    return static_cast<std::size_t>(n) * (1 + d) + static_cast<std::size_t>(i);
  }
};

std::vector<double> pack_params(const NetworkParams& p);
NetworkParams unpack_params(std::span<const double> packed, int n, int d);

/// u(x; theta) = sum_i a_i relu(omega_i . x + b_i)
double evaluate(const NetworkParams& p, std::span<const double> x);

/// Spatial gradient sum_i a_i omega_i sigma'(omega_i . x + b_i), sigma'(0) = 0.
void evaluate_gradient_x(const NetworkParams& p, std::span<const double> x,
                         std::span<double> grad_out);

/// Kink location -b/omega of a 1D neuron. Throws degenerate_neuron_error when
/// omega = 0.
double nodal_point(double omega_i, double b_i);

}  // namespace npsc
