#include "npsc/forms.hpp"

#include <cmath>

#include "npsc/kernels.hpp"
#include "npsc/parallel.hpp"

namespace npsc {

namespace k = kernels;

double form_apply(const BilinearForm& form, const QuadratureRule& rule,
                  std::span<const double> u_vals, std::span<const double> u_grads,
                  std::span<const double> v_vals, std::span<const double> v_grads) {
  const std::size_t N = rule.size;
  require(u_vals.size() == N && v_vals.size() == N, "form_apply: value length mismatch");
  double s = k::dot3(rule.weights.data(), u_vals.data(), v_vals.data(), N);
  if (form.kind == FormKind::H1) {
    const int d = rule.d;
    require(u_grads.size() == N * d && v_grads.size() == N * d,
            "form_apply: gradient length mismatch");
    std::vector<double> w_alpha(N);
    std::vector<double> x(d);
    for (std::size_t q = 0; q < N; ++q) {
      rule.point(q, x);
      w_alpha[q] = rule.weights[q] * form.alpha(x);
    }
    for (int c = 0; c < d; ++c)
      s += k::dot3(w_alpha.data(), u_grads.data() + c * N, v_grads.data() + c * N, N);
  }
  return s;
}

DiscreteProblem DiscreteProblem::make(BilinearForm form, QuadratureRule rule,
                                      const ScalarField& f) {
  rule.validate();
  form.domain.validate();
  require(form.domain.d == rule.d, "DiscreteProblem: dimension mismatch");
  DiscreteProblem p;
  p.form = std::move(form);
  p.rule = std::move(rule);
  const std::size_t N = p.rule.size;
  p.f_vals.resize(N);
  std::vector<double> x(p.rule.d);
  for (std::size_t q = 0; q < N; ++q) {
    p.rule.point(q, x);
    p.f_vals[q] = f(x);
  }
  if (p.form.kind == FormKind::H1) {
    require(static_cast<bool>(p.form.alpha), "DiscreteProblem: H1 form needs alpha");
    p.alpha_vals.resize(N);
    p.w_alpha.resize(N);
    for (std::size_t q = 0; q < N; ++q) {
      p.rule.point(q, x);
      const double av = p.form.alpha(x);
      require(av > 0.0, "DiscreteProblem: alpha must be positive at rule points");
      p.alpha_vals[q] = av;
      p.w_alpha[q] = p.rule.weights[q] * av;
    }
  }
  return p;
}

namespace {

// Value and gradient samples of u(.; theta), SoA layout.
struct NetworkFieldSamples {
  std::vector<double> u;      // N
  std::vector<double> grads;  // d blocks of N (only filled for H1)
};

NetworkFieldSamples sample_field(const DiscreteProblem& problem,
                                 const NetworkParams& params, bool want_grads) {
  const std::size_t N = problem.points();
  const int d = params.d;
  NetworkFieldSamples out;
  out.u.assign(N, 0.0);
  if (want_grads) out.grads.assign(static_cast<std::size_t>(d) * N, 0.0);
  std::vector<double> psi(N), act(N), t(N);
  for (int i = 0; i < params.n; ++i) {
    if (d == 1) {
      k::relu_affine(problem.rule.coord(0).data(), params.omega[i], params.b[i],
                     psi.data(), act.data(), N);
    } else {
      std::fill(t.begin(), t.end(), params.b[i]);
      for (int c = 0; c < d; ++c)
        k::axpy(params.omega_row(i)[c], problem.rule.coord(c).data(), t.data(), N);
      k::relu_split(t.data(), psi.data(), act.data(), N);
    }
    k::axpy(params.a[i], psi.data(), out.u.data(), N);
    if (want_grads)
      for (int c = 0; c < d; ++c)
        k::axpy(params.a[i] * params.omega_row(i)[c], act.data(),
                out.grads.data() + c * N, N);
  }
  return out;
}

}  // namespace

double energy(const DiscreteProblem& problem, const NetworkParams& params) {
  require(params.d == problem.rule.d, "energy: dimension mismatch");
  const std::size_t N = problem.points();
  NetworkFieldSamples s = sample_field(problem, params, problem.h1());
  const double* w = problem.rule.weights.data();
  double e = 0.5 * k::dot3(w, s.u.data(), s.u.data(), N) -
             k::dot3(w, problem.f_vals.data(), s.u.data(), N);
  if (problem.h1())
    for (int c = 0; c < problem.rule.d; ++c) {
      const double* g = s.grads.data() + c * N;
      e += 0.5 * k::dot3(problem.w_alpha.data(), g, g, N);
    }
  return e;
}

std::vector<double> energy_gradient(const DiscreteProblem& problem,
                                    const NetworkParams& params) {
  require(params.d == problem.rule.d, "energy_gradient: dimension mismatch");
  const std::size_t N = problem.points();
  const int d = params.d;
  const int n = params.n;
  const bool h1 = problem.h1();
  NetworkFieldSamples s = sample_field(problem, params, h1);

  // ruf[q] = w_q (u_q - f_q); for H1 additionally rg_c[q] = (w alpha)_q grad_c[q]
  std::vector<double> ruf(N);
  for (std::size_t q = 0; q < N; ++q)
    ruf[q] = problem.rule.weights[q] * (s.u[q] - problem.f_vals[q]);
  std::vector<double> rg;
  if (h1) {
    rg.assign(static_cast<std::size_t>(d) * N, 0.0);
    for (int c = 0; c < d; ++c)
      for (std::size_t q = 0; q < N; ++q)
        rg[c * N + q] = problem.w_alpha[q] * s.grads[c * N + q];
  }

  const SubspaceSplit split = SubspaceSplit::of(n, d);
  std::vector<double> grad(split.total(), 0.0);
  std::vector<double> psi(N), act(N), t(N);
  for (int i = 0; i < n; ++i) {
    if (d == 1) {
      k::relu_affine(problem.rule.coord(0).data(), params.omega[i], params.b[i],
                     psi.data(), act.data(), N);
    } else {
      std::fill(t.begin(), t.end(), params.b[i]);
      for (int c = 0; c < d; ++c)
        k::axpy(params.omega_row(i)[c], problem.rule.coord(c).data(), t.data(), N);
      k::relu_split(t.data(), psi.data(), act.data(), N);
    }
    // dE/da_i = a(psi_i, u) - integral f psi_i
    double ga = k::dot(ruf.data(), psi.data(), N);
    if (h1)
      for (int c = 0; c < d; ++c)
        ga += params.omega_row(i)[c] * k::dot(rg.data() + c * N, act.data(), N);
    grad[i] = ga;

    const double ai = params.a[i];
    const double gb_base = k::dot(ruf.data(), act.data(), N);
    for (int c = 0; c < d; ++c) {
      double gw = k::dot3(ruf.data(), problem.rule.coord(c).data(), act.data(), N);
      if (h1) gw += k::dot(rg.data() + c * N, act.data(), N);
      grad[split.omega_begin(i) + c] = ai * gw;
    }
    grad[split.b_index(i)] = ai * gb_base;
  }
  return grad;
}

SampledNetwork sample_network(const QuadratureRule& rule, std::span<const double> omega,
                              std::span<const double> b, int n, int d) {
  require(omega.size() == static_cast<std::size_t>(n) * d && b.size() == static_cast<std::size_t>(n),
          "sample_network: parameter length mismatch");
  const std::size_t N = rule.size;
  SampledNetwork cache;
  cache.n = n;
  cache.N = N;
  cache.psi.resize(static_cast<std::size_t>(n) * N);
  cache.act.resize(static_cast<std::size_t>(n) * N);
  parallel_for(0, static_cast<std::size_t>(n), [&](std::size_t i) {
    double* psi = cache.psi.data() + i * N;
    double* act = cache.act.data() + i * N;
    if (d == 1) {
      k::relu_affine(rule.coord(0).data(), omega[i], b[i], psi, act, N);
    } else {
      std::vector<double> t(N, b[i]);
      for (int c = 0; c < d; ++c)
        k::axpy(omega[i * d + c], rule.coord(c).data(), t.data(), N);
      k::relu_split(t.data(), psi, act, N);
    }
  });
  return cache;
}

void assemble_system(const DiscreteProblem& problem, std::span<const double> omega,
                     const SampledNetwork& cache, DenseMatrix& K,
                     std::vector<double>& beta) {
  const int n = cache.n;
  const int d = problem.rule.d;
  const std::size_t N = cache.N;
  const bool h1 = problem.h1();
  const double* w = problem.rule.weights.data();
  K = DenseMatrix(n, n);
  beta.assign(n, 0.0);
  parallel_for(0, static_cast<std::size_t>(n), [&](std::size_t i) {
    const double* psi_i = cache.psi.data() + i * N;
    const double* act_i = cache.act.data() + i * N;
    beta[i] = k::dot3(w, problem.f_vals.data(), psi_i, N);
    for (std::size_t j = 0; j <= i; ++j) {
      double v = k::dot3(w, psi_i, cache.psi.data() + j * N, N);
      if (h1) {
        double ww = 0.0;
        for (int c = 0; c < d; ++c) ww += omega[i * d + c] * omega[j * d + c];
        if (ww != 0.0)
          v += ww * k::dot3(problem.w_alpha.data(), act_i, cache.act.data() + j * N, N);
      }
      K(i, j) = v;
    }
  });
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) K(i, j) = K(j, i);
}

void assemble_system(const DiscreteProblem& problem, std::span<const double> omega,
                     std::span<const double> b, DenseMatrix& K, std::vector<double>& beta) {
  const int n = static_cast<int>(b.size());
  SampledNetwork cache = sample_network(problem.rule, omega, b, n, problem.rule.d);
  assemble_system(problem, omega, cache, K, beta);
}

NeuronFunctional neuron_linear_functional(const DiscreteProblem& problem,
                                          const NetworkParams& params, int i,
                                          const SampledNetwork& cache) {
  require(i >= 0 && i < params.n, "neuron_linear_functional: bad index");
  require(params.a[i] != 0.0, "neuron_linear_functional: a_i = 0 (trivial subproblem)");
  const std::size_t N = problem.points();
  const int d = params.d;
  const double inv_ai = 1.0 / params.a[i];

  // remainder v = sum_{j != i} a_j psi_j and its gradient, from the cache
  std::vector<double> v(N, 0.0);
  for (int j = 0; j < params.n; ++j)
    if (j != i) k::axpy(params.a[j], cache.psi.data() + static_cast<std::size_t>(j) * N, v.data(), N);

  NeuronFunctional fn;
  fn.c_val.resize(N);
  for (std::size_t q = 0; q < N; ++q)
    fn.c_val[q] = problem.rule.weights[q] * (problem.f_vals[q] - v[q]) * inv_ai;

  if (problem.h1()) {
    fn.c_grad.assign(static_cast<std::size_t>(d) * N, 0.0);
    std::vector<double> vg(N);
    for (int c = 0; c < d; ++c) {
      std::fill(vg.begin(), vg.end(), 0.0);
      for (int j = 0; j < params.n; ++j)
        if (j != i)
          k::axpy(params.a[j] * params.omega_row(j)[c],
                  cache.act.data() + static_cast<std::size_t>(j) * N, vg.data(), N);
      double* out = fn.c_grad.data() + static_cast<std::size_t>(c) * N;
      for (std::size_t q = 0; q < N; ++q)
        out[q] = -problem.w_alpha[q] * vg[q] * inv_ai;
    }
  }
  return fn;
}

NeuronFunctional neuron_linear_functional(const DiscreteProblem& problem,
                                          const NetworkParams& params, int i) {
  SampledNetwork cache =
      sample_network(problem.rule, params.omega, params.b, params.n, params.d);
  return neuron_linear_functional(problem, params, i, cache);
}

NetworkTotals network_totals(const DiscreteProblem& problem,
                             const NetworkParams& params, const SampledNetwork& cache) {
  const std::size_t N = problem.points();
  const int d = params.d;
  NetworkTotals totals;
  totals.value.assign(N, 0.0);
  for (int j = 0; j < params.n; ++j)
    k::axpy(params.a[j], cache.psi.data() + static_cast<std::size_t>(j) * N,
            totals.value.data(), N);
  if (problem.h1()) {
    totals.grad.assign(static_cast<std::size_t>(d) * N, 0.0);
    for (int c = 0; c < d; ++c)
      for (int j = 0; j < params.n; ++j)
        k::axpy(params.a[j] * params.omega_row(j)[c],
                cache.act.data() + static_cast<std::size_t>(j) * N,
                totals.grad.data() + static_cast<std::size_t>(c) * N, N);
  }
  return totals;
}

NeuronFunctional neuron_linear_functional(const DiscreteProblem& problem,
                                          const NetworkParams& params, int i,
                                          const SampledNetwork& cache,
                                          const NetworkTotals& totals) {
  require(i >= 0 && i < params.n, "neuron_linear_functional: bad index");
  require(params.a[i] != 0.0, "neuron_linear_functional: a_i = 0 (trivial subproblem)");
  const std::size_t N = problem.points();
  const int d = params.d;
  const double ai = params.a[i];
  const double inv_ai = 1.0 / ai;
  const double* psi_i = cache.psi.data() + static_cast<std::size_t>(i) * N;
  const double* act_i = cache.act.data() + static_cast<std::size_t>(i) * N;

  NeuronFunctional fn;
  fn.c_val.resize(N);
  for (std::size_t q = 0; q < N; ++q) {
    const double v = totals.value[q] - ai * psi_i[q];
    fn.c_val[q] = problem.rule.weights[q] * (problem.f_vals[q] - v) * inv_ai;
  }
  if (problem.h1()) {
    fn.c_grad.resize(static_cast<std::size_t>(d) * N);
    for (int c = 0; c < d; ++c) {
      const double wic = params.omega_row(i)[c];
      const double* gc = totals.grad.data() + static_cast<std::size_t>(c) * N;
      double* out = fn.c_grad.data() + static_cast<std::size_t>(c) * N;
      for (std::size_t q = 0; q < N; ++q) {
        const double vg = gc[q] - ai * wic * act_i[q];
        out[q] = -problem.w_alpha[q] * vg * inv_ai;
      }
    }
  }
  return fn;
}

}  // namespace npsc
