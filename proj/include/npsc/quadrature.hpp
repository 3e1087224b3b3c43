#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "npsc/model.hpp"

namespace npsc {

/// Sample points and weights defining every integral in the library.
/// Coordinates are stored structure-of-arrays: coord(k)[q] is the k-th
/// coordinate of point q, so 1D kernels stream a contiguous array.
struct QuadratureRule {
  int d = 1;
  std::size_t size = 0;
  std::vector<double> coords;   // d blocks of length size
  std::vector<double> weights;  // size

  std::span<const double> coord(int k) const {
    return {coords.data() + static_cast<std::size_t>(k) * size, size};
  }
  void point(std::size_t q, std::span<double> out) const {
    for (int k = 0; k < d; ++k) out[k] = coords[static_cast<std::size_t>(k) * size + q];
  }
  void validate() const;
};

/// Composite trapezoid on [0,1]: x_j = (j-1)/(N-1), end weights h/2, inner h.
QuadratureRule trapezoid_rule(std::size_t N);

/// Digits of j in base p mirrored across the radix point.
double radical_inverse(std::uint64_t j, std::uint64_t p);

/// Halton low-discrepancy rule on (0,1)^d: point j has k-th coordinate
/// radical_inverse(j, p_k), weights all 1/N.
QuadratureRule halton_rule(std::size_t N, int d);

/// Affine rescaling of a unit-box rule onto an arbitrary box.
QuadratureRule rescale_to(const QuadratureRule& unit_rule, const BoxDomain& box);

/// k-th prime, 1-indexed (nth_prime(1) = 2). Trial division; k stays tiny.
std::uint64_t nth_prime(int k);

}  // namespace npsc
