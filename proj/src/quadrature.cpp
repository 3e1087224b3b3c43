#include "npsc/quadrature.hpp"

#include <cmath>

namespace npsc {

void QuadratureRule::validate() const {
  require(d > 0, "QuadratureRule: d must be positive");
  require(size >= 1, "QuadratureRule: empty rule");
  require(coords.size() == static_cast<std::size_t>(d) * size,
          "QuadratureRule: coordinate storage size mismatch");
  require(weights.size() == size, "QuadratureRule: weight count mismatch");
}

QuadratureRule trapezoid_rule(std::size_t N) {
  require(N >= 2, "trapezoid_rule: N must be at least 2");
  QuadratureRule rule;
  rule.d = 1;
  rule.size = N;
  rule.coords.resize(N);
  rule.weights.resize(N);
  const double h = 1.0 / static_cast<double>(N - 1);
  for (std::size_t j = 0; j < N; ++j) {
    // direct quotient, not j*h: keeps rational grid points exactly rounded
    rule.coords[j] = static_cast<double>(j) / static_cast<double>(N - 1);
    rule.weights[j] = h;
  }
  rule.coords[N - 1] = 1.0;
  rule.weights[0] = 0.5 * h;
  rule.weights[N - 1] = 0.5 * h;
  return rule;
}

double radical_inverse(std::uint64_t j, std::uint64_t p) {
  require(j >= 1, "radical_inverse: index must be >= 1");
  require(p >= 2, "radical_inverse: base must be >= 2");
  double value = 0.0;
  double scale = 1.0 / static_cast<double>(p);
  while (j > 0) {
    value += static_cast<double>(j % p) * scale;
    scale /= static_cast<double>(p);
    j /= p;
  }
  return value;
}

QuadratureRule halton_rule(std::size_t N, int d) {
  require(N >= 1, "halton_rule: N must be at least 1");
  require(d >= 1, "halton_rule: d must be at least 1");
  QuadratureRule rule;
  rule.d = d;
  rule.size = N;
  rule.coords.resize(static_cast<std::size_t>(d) * N);
  rule.weights.assign(N, 1.0 / static_cast<double>(N));
  for (int k = 0; k < d; ++k) {
    const std::uint64_t p = nth_prime(k + 1);
    double* col = rule.coords.data() + static_cast<std::size_t>(k) * N;
    for (std::size_t j = 0; j < N; ++j) col[j] = radical_inverse(j + 1, p);
  }
  return rule;
}

QuadratureRule rescale_to(const QuadratureRule& unit_rule, const BoxDomain& box) {
  box.validate();
  require(box.d == unit_rule.d, "rescale_to: dimension mismatch");
  QuadratureRule rule = unit_rule;
  const double vol = box.volume();
  for (int k = 0; k < box.d; ++k) {
    const double lo = box.lower[k];
    const double len = box.upper[k] - box.lower[k];
    double* col = rule.coords.data() + static_cast<std::size_t>(k) * rule.size;
    for (std::size_t q = 0; q < rule.size; ++q) col[q] = lo + len * col[q];
  }
  for (std::size_t q = 0; q < rule.size; ++q) rule.weights[q] *= vol;
  return rule;
}

std::uint64_t nth_prime(int k) {
  require(k >= 1, "nth_prime: index must be >= 1");
  std::uint64_t candidate = 1;
  for (int found = 0; found < k;) {
    ++candidate;
    bool prime = candidate >= 2;
    for (std::uint64_t q = 2; q * q <= candidate; ++q) {
      if (candidate % q == 0) {
        prime = false;
        break;
      }
    }
    if (prime) ++found;
  }
  return candidate;
}

}  // namespace npsc
