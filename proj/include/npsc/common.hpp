#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace npsc {

// Contract violations (bad arguments, mismatched sizes) throw invalid_argument.
// The error types below carry a recoverable meaning for callers.

/// A neuron with omega = 0 has no nodal point; callers must adjust first.
struct degenerate_neuron_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Node assumptions violated (zero neuron on the domain, or more than two
/// exterior nodal points). The adjustment step removes these configurations.
struct assumption_violation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Krylov solver detected a direction of non-positive curvature.
struct non_spd_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tridiagonal pivot below threshold: nodes too close for a stable solve.
struct degenerate_grid_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense elimination hit a zero pivot.
struct singular_matrix_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace npsc
