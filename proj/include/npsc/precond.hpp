#pragma once

#include <span>
#include <vector>

#include "npsc/forms.hpp"
#include "npsc/linsolve.hpp"
#include "npsc/model.hpp"
#include "npsc/quadrature.hpp"

namespace npsc {

/// Nodal-point analysis of a 1D network on (0,1): interior kinks sorted
/// ascending (ties perturbed deterministically), exterior neurons reduced to
/// their endpoint values. Positions 0..n_interior-1 of the sorted order carry
/// the interior neurons, the rest are exterior.
struct NodeAnalysis {
  int n = 0;
  int n_interior = 0;            // n_Omega
  std::vector<int> order;        // sorted position -> original index
  std::vector<double> nodes;     // interior nodal points, strictly increasing
  std::vector<double> slope;     // omega in sorted order (length n)
  std::vector<double> ext_at1;   // psi(1) per exterior neuron
  std::vector<double> ext_at0;   // psi(0) per exterior neuron
};

/// Classifies and sorts nodal points; verifies the preconditioner's
/// admissibility assumptions. Throws assumption_violation_error when a neuron
/// vanishes on the domain or more than two nodal points fall outside it.
NodeAnalysis analyze_nodes(std::span<const double> omega, std::span<const double> b,
                           const BoxDomain& domain);

/// How the tridiagonal hat Gram is assembled. The mass part is always
/// evaluated at the rule's points like every other form in the library.
///
/// `exact_stiffness` (production default) integrates the derivative products
/// analytically per cell, with the coefficient taken from a prefix integral
/// of its samples. Point sampling is the wrong tool for those integrands:
/// they are piecewise constant with jumps at the kinks, and a fully sampled
/// Gram makes Pbar the exact inverse of the sampled Kbar, collapsing PCG to
/// a single refinement step instead of exposing preconditioner quality.
///
/// `sampled` evaluates the derivative products at the rule's points as well.
/// The two modes coincide for L2 forms.
enum class HatGramMode { exact_stiffness, sampled };

/// Everything needed to apply P = (R Pbar^-1 R^T)^-1 in O(n): the arrow-shaped
/// slope matrix B1, the hat-conversion rows B2, the tridiagonal hat Gram
/// factored for Thomas solves, and the two trailing rows of Pbar (and of its
/// diagonal variant) precomputed at build time.
struct PreconditionerData {
  NodeAnalysis analysis;
  FormKind kind = FormKind::L2;
  int m = 0;  // n_interior + 2

  // B1 (psi-bar = B1 psi-plus): diagonal plus two coupling columns.
  std::vector<double> b1_diag;  // m (trailing two entries are 1)
  std::vector<double> b1_colL;  // n_interior (zero for positive slopes)
  std::vector<double> b1_colR;  // n_interior

  // B2 rows (phi-bar = B2 psi-plus), up to three entries per row.
  struct SparseRow {
    int col[3] = {-1, -1, -1};
    double coeff[3] = {0.0, 0.0, 0.0};
    int count = 0;
  };
  std::vector<SparseRow> b2_rows;  // m rows, basis order (phi_1..phi_nO, phi_L, phi_R)

  TridiagonalMatrix hat_gram;      // spatial order (phi_L, phi_1..phi_nO, phi_R)
  TridiagonalFactor hat_factor;
  std::vector<double> hat_diag_inv;  // diagonal variant

  // Rows n_interior and n_interior+1 of Pbar = B^T Kbar_phi^-1 B, basis order.
  std::vector<double> pbar_rowL, pbar_rowR;
  std::vector<double> pdiag_rowL, pdiag_rowR;
};

PreconditionerData build_preconditioner(const BilinearForm& form,
                                        const QuadratureRule& rule,
                                        const NodeAnalysis& analysis,
                                        HatGramMode mode = HatGramMode::exact_stiffness);

/// Fast path reusing the problem's cached alpha samples.
PreconditionerData build_preconditioner(const DiscreteProblem& problem,
                                        const NodeAnalysis& analysis,
                                        HatGramMode mode = HatGramMode::exact_stiffness);

/// out = (R Pbar^-1 R^T)^-1 alpha. Vectors indexed in the sorted neuron order.
void apply_P(const PreconditionerData& data, std::span<const double> alpha,
             std::span<double> out);

/// Variant with diag(Kbar_phi)^-1 in place of the Thomas solve, L2 forms only.
void apply_Pdiag(const PreconditionerData& data, std::span<const double> alpha,
                 std::span<double> out);

/// Closed-form solve with the arrow matrix B1 (length n_interior + 2 vectors).
void apply_B1_inverse(const PreconditionerData& data, std::span<const double> alpha,
                      std::span<double> out);

/// Pbar action (basis order, length m vectors); diagonal variant selectable.
void apply_Pbar(const PreconditionerData& data, std::span<const double> y,
                std::span<double> out, bool diag_variant = false);

}  // namespace npsc
