#pragma once

#include <functional>
#include <span>
#include <vector>

#include "npsc/linsolve.hpp"
#include "npsc/model.hpp"
#include "npsc/quadrature.hpp"

namespace npsc {

enum class FormKind { L2, H1 };

using ScalarField = std::function<double(std::span<const double>)>;

/// L2 mass form or H1 form with coefficient alpha. Every inner product in the
/// library is evaluated through this form by quadrature; the underlying
/// differential operator is never materialized.
struct BilinearForm {
  FormKind kind = FormKind::L2;
  BoxDomain domain = BoxDomain::unit(1);
  ScalarField alpha;  // H1 only
};

/// a(u, v) from sampled values (and gradients, H1 only) at the rule's points.
/// Gradient arrays are structure-of-arrays with d blocks of length N.
double form_apply(const BilinearForm& form, const QuadratureRule& rule,
                  std::span<const double> u_vals, std::span<const double> u_grads,
                  std::span<const double> v_vals, std::span<const double> v_grads);

/// A bilinear form bound to a quadrature rule and source, with f and alpha
/// sampled once. Immutable after construction; safe for concurrent reads.
struct DiscreteProblem {
  BilinearForm form;
  QuadratureRule rule;
  std::vector<double> f_vals;      // N
  std::vector<double> alpha_vals;  // N (H1) or empty
  std::vector<double> w_alpha;     // weights * alpha (H1) or empty

  static DiscreteProblem make(BilinearForm form, QuadratureRule rule,
                              const ScalarField& f);

  bool h1() const { return form.kind == FormKind::H1; }
  std::size_t points() const { return rule.size; }
};

/// E(theta) = 1/2 a(u, u) - integral of f u, all through the problem's rule.
double energy(const DiscreteProblem& problem, const NetworkParams& params);

/// Packed gradient (a | omega | b) with sigma'(0) = 0 and Dirac terms dropped.
std::vector<double> energy_gradient(const DiscreteProblem& problem,
                                    const NetworkParams& params);

/// Per-neuron activation samples at the rule's points.
struct SampledNetwork {
  int n = 0;
  std::size_t N = 0;
  std::vector<double> psi;  // n rows of N
  std::vector<double> act;  // n rows of N (sigma' samples as 0/1)

  std::span<const double> psi_row(int i) const { return {psi.data() + i * N, N}; }
  std::span<const double> act_row(int i) const { return {act.data() + i * N, N}; }
};

SampledNetwork sample_network(const QuadratureRule& rule, std::span<const double> omega,
                              std::span<const double> b, int n, int d);

/// K_ij = a(psi_j, psi_i), beta_i = integral of f psi_i. K is exactly symmetric.
void assemble_system(const DiscreteProblem& problem, std::span<const double> omega,
                     std::span<const double> b, DenseMatrix& K, std::vector<double>& beta);

/// Assembly from a precomputed sample cache (row-parallel path).
void assemble_system(const DiscreteProblem& problem, std::span<const double> omega,
                     const SampledNetwork& cache, DenseMatrix& K,
                     std::vector<double>& beta);

/// Coefficients evaluating psi -> integral of F psi for a candidate neuron psi:
/// sum_q c_val[q] psi(x_q) + sum_k sum_q c_grad_k[q] d_k psi(x_q).
/// c_grad is empty for L2 forms. Quadrature weights are folded in.
struct NeuronFunctional {
  std::vector<double> c_val;   // N
  std::vector<double> c_grad;  // d blocks of N (H1) or empty

  std::span<const double> grad_block(int k, std::size_t N) const {
    return {c_grad.data() + static_cast<std::size_t>(k) * N, N};
  }
};

/// Linear functional of the single-neuron subproblem for neuron i, built from
/// f and the frozen remainder of the network. Requires a_i != 0.
NeuronFunctional neuron_linear_functional(const DiscreteProblem& problem,
                                          const NetworkParams& params, int i);

/// Fast path reusing a sample cache of the current network.
NeuronFunctional neuron_linear_functional(const DiscreteProblem& problem,
                                          const NetworkParams& params, int i,
                                          const SampledNetwork& cache);

/// Whole-network sums u = sum_j a_j psi_j (and grad components for H1),
/// shared across the per-neuron functionals of one epoch.
struct NetworkTotals {
  std::vector<double> value;  // N
  std::vector<double> grad;   // d blocks of N (H1) or empty
};

NetworkTotals network_totals(const DiscreteProblem& problem,
                             const NetworkParams& params, const SampledNetwork& cache);

/// O(N) per neuron given the totals: the remainder is totals minus neuron i.
NeuronFunctional neuron_linear_functional(const DiscreteProblem& problem,
                                          const NetworkParams& params, int i,
                                          const SampledNetwork& cache,
                                          const NetworkTotals& totals);

}  // namespace npsc
