#pragma once

#include <span>
#include <vector>

#include "npsc/forms.hpp"

namespace npsc {

/// Single-neuron subproblem: minimize E_i(w, b) = 1/2 a(psi, psi) - l(psi)
/// over the d+1 parameters of psi(x) = relu(w.x + b), where l captures the
/// source and the frozen remainder of the network.
struct NeuronProblem {
  const DiscreteProblem* problem = nullptr;
  NeuronFunctional functional;
  std::vector<double> omega0;  // d
  double b0 = 0.0;

  int dim() const { return static_cast<int>(omega0.size()); }
  void validate() const;
};

struct LMConfig {
  double tol = 1e-10;       // relative energy-change stop
  int max_iter = 200;
  double mu0_scale = 1e-3;  // mu_0 = mu0_scale * trace(H) / (d+1)
  double nu = 2.0;          // damping up/down factor
  double mu_max = 1e16;
};

double local_energy(const NeuronProblem& np, std::span<const double> omega, double b);

/// Gradient in (omega, b); sigma'(0) = 0 and Dirac terms dropped.
void local_gradient(const NeuronProblem& np, std::span<const double> omega, double b,
                    std::span<double> grad_out);

/// Gauss-Newton curvature H_kl = a(J_k psi, J_l psi); symmetric PSD.
void gauss_newton_hessian(const NeuronProblem& np, std::span<const double> omega,
                          double b, DenseMatrix& H);

struct LMResult {
  std::vector<double> omega;
  double b = 0.0;
  double energy = 0.0;
  int iterations = 0;   // (H + mu I) solves, accepted or rejected
  bool converged = false;
  bool flat = false;    // iterate entered the all-inactive region
};

/// Damped Gauss-Newton iteration with monotone acceptance. Never increases
/// the energy; non-convergence returns the best iterate with converged=false.
LMResult levenberg_marquardt(const NeuronProblem& np, const LMConfig& config);

}  // namespace npsc
