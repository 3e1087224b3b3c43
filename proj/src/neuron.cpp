#include "npsc/neuron.hpp"

#include <algorithm>
#include <cmath>

#include "npsc/kernels.hpp"

namespace npsc {

namespace k = kernels;

void NeuronProblem::validate() const {
  require(problem != nullptr, "NeuronProblem: missing problem");
  const std::size_t N = problem->points();
  require(functional.c_val.size() == N, "NeuronProblem: functional length mismatch");
  if (problem->h1())
    require(functional.c_grad.size() == N * omega0.size(),
            "NeuronProblem: gradient functional length mismatch");
  require(static_cast<int>(omega0.size()) == problem->rule.d,
          "NeuronProblem: dimension mismatch");
}

namespace {

// Samples of the candidate neuron at the rule's points.
struct Samples {
  std::vector<double> psi, act;
};

void sample_neuron(const DiscreteProblem& problem, std::span<const double> omega,
                   double b, Samples& s) {
  const std::size_t N = problem.points();
  const int d = problem.rule.d;
  s.psi.resize(N);
  s.act.resize(N);
  if (d == 1) {
    k::relu_affine(problem.rule.coord(0).data(), omega[0], b, s.psi.data(),
                   s.act.data(), N);
  } else {
    std::vector<double> t(N, b);
    for (int c = 0; c < d; ++c)
      k::axpy(omega[c], problem.rule.coord(c).data(), t.data(), N);
    k::relu_split(t.data(), s.psi.data(), s.act.data(), N);
  }
}

double energy_from_samples(const NeuronProblem& np, std::span<const double> omega,
                           const Samples& s) {
  const DiscreteProblem& p = *np.problem;
  const std::size_t N = p.points();
  const double* w = p.rule.weights.data();
  double e = 0.5 * k::dot3(w, s.psi.data(), s.psi.data(), N) -
             k::dot(np.functional.c_val.data(), s.psi.data(), N);
  if (p.h1()) {
    double ww = 0.0;
    for (std::size_t c = 0; c < omega.size(); ++c) ww += omega[c] * omega[c];
    e += 0.5 * ww * k::dot3(p.w_alpha.data(), s.act.data(), s.act.data(), N);
    for (std::size_t c = 0; c < omega.size(); ++c)
      e -= omega[c] * k::dot(np.functional.grad_block(c, N).data(), s.act.data(), N);
  }
  return e;
}

void gradient_from_samples(const NeuronProblem& np, std::span<const double> omega,
                           const Samples& s, std::span<double> grad) {
  const DiscreteProblem& p = *np.problem;
  const std::size_t N = p.points();
  const int d = p.rule.d;
  const double* w = p.rule.weights.data();
  const double act_mass = p.h1() ? k::dot(p.w_alpha.data(), s.act.data(), N) : 0.0;
  for (int c = 0; c < d; ++c) {
    double g = k::dot3(w, s.psi.data(), p.rule.coord(c).data(), N) -
               k::dot3(np.functional.c_val.data(), p.rule.coord(c).data(),
                       s.act.data(), N);
    if (p.h1())
      g += omega[c] * act_mass -
           k::dot(np.functional.grad_block(c, N).data(), s.act.data(), N);
    grad[c] = g;
  }
  grad[d] = k::dot(w, s.psi.data(), N) -
            k::dot(np.functional.c_val.data(), s.act.data(), N);
}

void hessian_from_samples(const NeuronProblem& np, const Samples& s, DenseMatrix& H) {
  const DiscreteProblem& p = *np.problem;
  const std::size_t N = p.points();
  const int d = p.rule.d;
  H = DenseMatrix(d + 1, d + 1);
  std::vector<double> wact(N);
  for (std::size_t q = 0; q < N; ++q) wact[q] = p.rule.weights[q] * s.act[q];
  const double act_alpha = p.h1() ? k::dot(p.w_alpha.data(), s.act.data(), N) : 0.0;
  for (int c = 0; c < d; ++c) {
    for (int e = c; e < d; ++e) {
      double v = k::dot3(wact.data(), p.rule.coord(c).data(), p.rule.coord(e).data(), N);
      if (c == e && p.h1()) v += act_alpha;
      H(c, e) = v;
      H(e, c) = v;
    }
    const double v = k::dot(wact.data(), p.rule.coord(c).data(), N);
    H(c, d) = v;
    H(d, c) = v;
  }
  H(d, d) = k::sum(wact.data(), N);
}

bool all_inactive(const Samples& s) {
  return k::sum(s.act.data(), s.act.size()) == 0.0;
}

}  // namespace

double local_energy(const NeuronProblem& np, std::span<const double> omega, double b) {
  Samples s;
  sample_neuron(*np.problem, omega, b, s);
  return energy_from_samples(np, omega, s);
}

void local_gradient(const NeuronProblem& np, std::span<const double> omega, double b,
                    std::span<double> grad_out) {
  require(grad_out.size() == omega.size() + 1, "local_gradient: bad output length");
  Samples s;
  sample_neuron(*np.problem, omega, b, s);
  gradient_from_samples(np, omega, s, grad_out);
}

void gauss_newton_hessian(const NeuronProblem& np, std::span<const double> omega,
                          double b, DenseMatrix& H) {
  Samples s;
  sample_neuron(*np.problem, omega, b, s);
  (void)omega;
  hessian_from_samples(np, s, H);
}

LMResult levenberg_marquardt(const NeuronProblem& np, const LMConfig& config) {
  np.validate();
  require(config.tol > 0.0 && config.mu0_scale > 0.0 && config.nu > 1.0,
          "levenberg_marquardt: bad configuration");
  const int d = np.dim();
  const int nparam = d + 1;

  LMResult res;
  res.omega = np.omega0;
  res.b = np.b0;

  Samples cur, trial;
  sample_neuron(*np.problem, res.omega, res.b, cur);
  double energy = energy_from_samples(np, res.omega, cur);
  res.energy = energy;
  if (all_inactive(cur)) {
    res.flat = true;
    return res;
  }

  std::vector<double> grad(nparam), step(nparam), omega_t(d);
  DenseMatrix H;
  double mu = -1.0;  // initialized from the first Hessian

  while (res.iterations < config.max_iter) {
    sample_neuron(*np.problem, res.omega, res.b, cur);
    if (all_inactive(cur)) {
      res.flat = true;
      return res;
    }
    gradient_from_samples(np, res.omega, cur, grad);
    hessian_from_samples(np, cur, H);
    double trace = 0.0;
    for (int i = 0; i < nparam; ++i) trace += H(i, i);
    if (mu < 0.0) mu = config.mu0_scale * trace / nparam;

    double gnorm = 0.0;
    for (double g : grad) gnorm += g * g;
    gnorm = std::sqrt(gnorm);
    if (gnorm <= 1e-13 * (1.0 + trace)) {
      res.converged = true;
      return res;
    }

    // Escalate damping until a descent step is accepted.
    bool accepted = false;
    while (res.iterations < config.max_iter) {
      ++res.iterations;
      DenseMatrix M = H;
      for (int i = 0; i < nparam; ++i) M(i, i) += mu;
      std::vector<double> rhs(nparam);
      for (int i = 0; i < nparam; ++i) rhs[i] = -grad[i];
      step = dense_solve(std::move(M), std::move(rhs));
      for (int c = 0; c < d; ++c) omega_t[c] = res.omega[c] + step[c];
      const double b_t = res.b + step[d];
      sample_neuron(*np.problem, omega_t, b_t, trial);
      const double e_t = energy_from_samples(np, omega_t, trial);
      if (e_t < energy) {
        for (int c = 0; c < d; ++c) res.omega[c] = omega_t[c];
        res.b = b_t;
        mu /= config.nu;
        accepted = true;
        const double prev = energy;
        energy = e_t;
        res.energy = energy;
        // Relative energy-change criterion, with an absolute fallback at zero.
        const bool stop = std::abs(energy) < 1e-300
                              ? std::abs(prev - energy) < 1e-16
                              : std::abs(prev - energy) / std::abs(energy) < config.tol;
        if (stop) {
          res.converged = true;
          return res;
        }
        break;
      }
      mu *= config.nu;
      if (mu > config.mu_max) return res;  // stuck; best iterate, unconverged
    }
    if (!accepted) break;
  }
  return res;
}

}  // namespace npsc
