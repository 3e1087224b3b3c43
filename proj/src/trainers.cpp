#include "npsc/trainers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>

#include "npsc/kernels.hpp"
#include "npsc/parallel.hpp"

namespace npsc {

namespace k = kernels;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double norm2(std::span<const double> v) {
  return std::sqrt(k::dot(v.data(), v.data(), v.size()));
}

}  // namespace

TrainState make_state(const DiscreteProblem& problem, NetworkParams params) {
  params.validate();
  TrainState state;
  state.params = std::move(params);
  state.energy_history.push_back(energy(problem, state.params));
  return state;
}

int adjust_parameters(NetworkParams& params, const BoxDomain& domain,
                      const TrainRng& rng) {
  domain.validate();
  require(params.d == domain.d, "adjust_parameters: dimension mismatch");
  const int n = params.n;
  const int d = params.d;
  int resamples = 0;
  int linear_kept = 0;
  std::vector<double> vert(d);

  for (int i = 0; i < n; ++i) {
    auto w = params.omega_row(i);
    double norm = 0.0;
    for (int c = 0; c < d; ++c) norm += w[c] * w[c];
    norm = std::sqrt(norm);

    RngStream stream = rng.neuron_stream(static_cast<std::uint64_t>(i));
    bool fresh_direction = false;
    if (norm == 0.0) {
      // No direction to normalize; draw one uniformly on the sphere.
      if (d == 1) {
        w[0] = stream.next_unit() < 0.5 ? -1.0 : 1.0;
      } else {
        double len = 0.0;
        while (len == 0.0) {
          for (int c = 0; c < d; ++c) w[c] = stream.normal();
          len = 0.0;
          for (int c = 0; c < d; ++c) len += w[c] * w[c];
          len = std::sqrt(len);
        }
        for (int c = 0; c < d; ++c) w[c] /= len;
      }
      fresh_direction = true;
      ++resamples;
    } else {
      for (int c = 0; c < d; ++c) w[c] /= norm;
      params.b[i] /= norm;
    }

    // Extrema of omega . x over the box vertices.
    double mplus = -1e300, mminus = 1e300;
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
      domain.vertex(mask, vert);
      double t = 0.0;
      for (int c = 0; c < d; ++c) t += w[c] * vert[c];
      mplus = std::max(mplus, t);
      mminus = std::min(mminus, t);
    }

    if (fresh_direction) {
      params.b[i] = stream.uniform(-mplus, -mminus);
      continue;
    }
    if (params.b[i] <= -mplus) {
      params.b[i] = stream.uniform(-mplus, -mminus);
      ++resamples;
    }
    if (params.b[i] >= -mminus) {
      if (linear_kept < d + 1) {
        ++linear_kept;
      } else {
        params.b[i] = stream.uniform(-mplus, -mminus);
        ++resamples;
      }
    }
  }
  return resamples;
}

namespace {

// Shared halving loop: candidate(tau) fills a params object, energy_of
// evaluates it. Returns through the same contract as backtrack().
struct LineSearchOutcome {
  double tau = 0.0;
  bool accepted = false;
  int halvings = 0;
  double energy = 0.0;
};

template <typename MakeCandidate>
LineSearchOutcome halving_search(const DiscreteProblem& problem, double e_ref,
                                 double tau_prev, const MakeCandidate& make_candidate) {
  LineSearchOutcome out;
  double tau = 2.0 * tau_prev;
  for (;;) {
    const NetworkParams& cand = make_candidate(tau);
    const double e = energy(problem, cand);
    if (e <= e_ref) {
      out.tau = tau;
      out.accepted = true;
      out.energy = e;
      return out;
    }
    tau *= 0.5;
    ++out.halvings;
    if (tau < kTauMin) {
      const NetworkParams& last = make_candidate(tau);
      out.tau = tau;
      out.accepted = false;
      out.energy = energy(problem, last);
      return out;
    }
  }
}

}  // namespace

BacktrackResult backtrack(const DiscreteProblem& problem, std::span<const double> a_new,
                          std::span<const double> omega_old, std::span<const double> b_old,
                          std::span<const double> omega_half, std::span<const double> b_half,
                          double tau_prev, int n, int d) {
  require(tau_prev > 0.0, "backtrack: tau_prev must be positive");
  NetworkParams ref(n, d);
  std::copy(a_new.begin(), a_new.end(), ref.a.begin());
  std::copy(omega_old.begin(), omega_old.end(), ref.omega.begin());
  std::copy(b_old.begin(), b_old.end(), ref.b.begin());
  const double e_ref = energy(problem, ref);

  NetworkParams cand = ref;
  auto make_candidate = [&](double tau) -> const NetworkParams& {
    for (std::size_t j = 0; j < cand.omega.size(); ++j)
      cand.omega[j] = (1.0 - tau) * omega_old[j] + tau * omega_half[j];
    for (int i = 0; i < n; ++i)
      cand.b[i] = (1.0 - tau) * b_old[i] + tau * b_half[i];
    return cand;
  };

  LineSearchOutcome out = halving_search(problem, e_ref, tau_prev, make_candidate);
  BacktrackResult res;
  res.tau = out.tau;
  res.accepted = out.accepted;
  res.halvings = out.halvings;
  res.energy = out.energy;
  res.omega = cand.omega;
  res.b = cand.b;
  return res;
}

void npsc_epoch(const DiscreteProblem& problem, TrainState& state,
                const NpscOptions& options, const TrainRng& rng) {
  const auto t0 = Clock::now();
  NetworkParams& params = state.params;
  const int n = params.n;
  const int d = params.d;
  EpochStats stats;

  // (1) adjustment, then (d = 1) relabel neurons in nodal order so that the
  // preconditioner and the stiffness assembly share one indexing.
  if (options.use_adjustment)
    stats.resamples = adjust_parameters(params, problem.form.domain, rng);
  NodeAnalysis analysis;
  bool precond_ok = d == 1 && options.precond != PrecondChoice::none;
  if (precond_ok) {
    try {
      analysis = analyze_nodes(params.omega, params.b, problem.form.domain);
      bool identity = true;
      for (int pos = 0; pos < n; ++pos)
        identity = identity && analysis.order[pos] == pos;
      if (!identity) {
        NetworkParams sorted(n, d);
        for (int pos = 0; pos < n; ++pos) {
          const int src = analysis.order[pos];
          sorted.a[pos] = params.a[src];
          sorted.omega[pos] = params.omega[src];
          sorted.b[pos] = params.b[src];
        }
        params = std::move(sorted);
        analysis = analyze_nodes(params.omega, params.b, problem.form.domain);
      }
    } catch (const assumption_violation_error&) {
      // Only reachable with the adjustment ablated; fall back to plain CG.
      if (options.use_adjustment) throw;
      precond_ok = false;
    }
  }

  // (2) exact minimization over the linear layer.
  SampledNetwork cache = sample_network(problem.rule, params.omega, params.b, n, d);
  DenseMatrix K;
  std::vector<double> beta;
  assemble_system(problem, params.omega, cache, K, beta);
  MatAction apply_K = [&](std::span<const double> in, std::span<double> out) {
    std::vector<double> y = matvec(K, in);
    std::copy(y.begin(), y.end(), out.begin());
  };
  SolveReport report;
  std::optional<PreconditionerData> pdata;
  bool grid_degenerate = false;
  if (precond_ok) {
    try {
      pdata = build_preconditioner(problem, analysis);
    } catch (const degenerate_grid_error&) {
      // Hat cells empty of samples: the Gram cannot be factored. Fall back
      // to ridge least squares, whose normal equations project the right side
      // onto the numerical range of K, guarded against energy increase.
      precond_ok = false;
      grid_degenerate = true;
    }
  }
  auto quad_energy = [&](std::span<const double> a) {
    std::vector<double> Ka = matvec(K, a);
    double e = 0.0;
    for (int i = 0; i < n; ++i) e += (0.5 * Ka[i] - beta[i]) * a[i];
    return e;
  };
  try {
    if (precond_ok) {
      MatAction apply_prec = [&](std::span<const double> in, std::span<double> out) {
        options.precond == PrecondChoice::diag ? apply_Pdiag(*pdata, in, out)
                                               : apply_P(*pdata, in, out);
      };
      report = pcg(apply_K, apply_prec, beta, params.a, options.pcg_tol, 10 * n);
    } else if (grid_degenerate) {
      std::vector<double> candidate = dense_lstsq(K, beta);
      if (quad_energy(candidate) <= quad_energy(params.a)) params.a = std::move(candidate);
      report.converged = false;
    } else if (d >= 2) {
      report = cg(apply_K, beta, params.a, options.pcg_tol, n);
    } else {
      report = cg(apply_K, beta, params.a, options.pcg_tol, 500000);
    }
  } catch (const non_spd_error&) {
    // Near-duplicate neurons can push K to numerically semi-definite; keep
    // the last completed iterate and flag the epoch.
    report.converged = false;
    report.iterations = 0;
  }
  stats.pcg_iters = report.iterations;
  {
    std::vector<double> r = matvec(K, params.a);
    for (int i = 0; i < n; ++i) r[i] -= beta[i];
    const double bnorm = norm2(beta);
    stats.a_converged = bnorm == 0.0 || norm2(r) / bnorm <= options.pcg_tol;
  }

  // (3) per-neuron subproblems over a read-only snapshot; each worker owns
  // its output slot, so results are independent of the worker count.
  std::vector<double> omega_half(params.omega), b_half(params.b);
  std::vector<long> lm_iters(n, 0);
  const NetworkTotals totals = network_totals(problem, params, cache);
  parallel_for(0, static_cast<std::size_t>(n), [&](std::size_t i) {
    if (params.a[i] == 0.0) return;  // trivial subproblem, neuron skipped
    NeuronProblem np;
    np.problem = &problem;
    np.functional =
        neuron_linear_functional(problem, params, static_cast<int>(i), cache, totals);
    np.omega0.assign(params.omega_row(static_cast<int>(i)).begin(),
                     params.omega_row(static_cast<int>(i)).end());
    np.b0 = params.b[i];
    if (options.use_lm) {
      LMResult res = levenberg_marquardt(np, options.lm);
      for (int c = 0; c < d; ++c) omega_half[i * d + c] = res.omega[c];
      b_half[i] = res.b;
      lm_iters[i] = res.iterations;
    } else {
      // Ablation: one halved descent step on the local energy.
      std::vector<double> g(d + 1);
      local_gradient(np, np.omega0, np.b0, g);
      const double e0 = local_energy(np, np.omega0, np.b0);
      double step = 1.0;
      std::vector<double> wt(d);
      for (int trial = 0; trial < 40; ++trial, step *= 0.5) {
        for (int c = 0; c < d; ++c) wt[c] = np.omega0[c] - step * g[c];
        const double bt = np.b0 - step * g[d];
        if (local_energy(np, wt, bt) < e0) {
          for (int c = 0; c < d; ++c) omega_half[i * d + c] = wt[c];
          b_half[i] = bt;
          break;
        }
      }
      lm_iters[i] = 1;
    }
  });
  for (long it : lm_iters) stats.lm_iters_total += it;

  // (4) relaxed update of the nonlinear layer.
  BacktrackResult bt = backtrack(problem, params.a, params.omega, params.b,
                                 omega_half, b_half, state.tau, n, d);
  params.omega = std::move(bt.omega);
  params.b = std::move(bt.b);
  state.tau = std::max(bt.tau, kTauMin);
  stats.accepted = bt.accepted;
  stats.bt_halvings = bt.halvings;
  stats.tau = bt.tau;
  stats.energy = bt.energy;

  stats.wall_ms = ms_since(t0);
  state.energy_history.push_back(stats.energy);
  state.stats.push_back(stats);
  ++state.epoch;
}

namespace {

void record_packed_step(const DiscreteProblem& problem, TrainState& state,
                        std::span<const double> direction, Clock::time_point t0,
                        int pcg_iters = 0, bool a_converged = true) {
  NetworkParams& params = state.params;
  const int n = params.n;
  const int d = params.d;
  const double e_ref = energy(problem, params);
  const std::vector<double> theta = pack_params(params);

  NetworkParams cand = params;
  auto make_candidate = [&](double tau) -> const NetworkParams& {
    std::vector<double> packed(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j)
      packed[j] = theta[j] - tau * direction[j];
    cand = unpack_params(packed, n, d);
    return cand;
  };
  LineSearchOutcome out = halving_search(problem, e_ref, state.tau, make_candidate);

  params = cand;
  state.tau = std::max(out.tau, kTauMin);
  EpochStats stats;
  stats.tau = out.tau;
  stats.accepted = out.accepted;
  stats.bt_halvings = out.halvings;
  stats.energy = out.energy;
  stats.pcg_iters = pcg_iters;
  stats.a_converged = a_converged;
  stats.wall_ms = ms_since(t0);
  state.energy_history.push_back(stats.energy);
  state.stats.push_back(stats);
  ++state.epoch;
}

}  // namespace

void gd_step(const DiscreteProblem& problem, TrainState& state) {
  const auto t0 = Clock::now();
  std::vector<double> g = energy_gradient(problem, state.params);
  record_packed_step(problem, state, g, t0);
}

void adam_step(const DiscreteProblem& problem, TrainState& state, AdamState& adam) {
  const auto t0 = Clock::now();
  std::vector<double> g = energy_gradient(problem, state.params);
  const std::size_t m = g.size();
  if (adam.m.empty()) {
    adam.m.assign(m, 0.0);
    adam.v.assign(m, 0.0);
  }
  require(adam.m.size() == m, "adam_step: moment size mismatch");
  const long t = adam.t + 1;
  std::vector<double> m1(m), v1(m), dir(m);
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(t));
  for (std::size_t j = 0; j < m; ++j) {
    m1[j] = adam.beta1 * adam.m[j] + (1.0 - adam.beta1) * g[j];
    v1[j] = adam.beta2 * adam.v[j] + (1.0 - adam.beta2) * g[j] * g[j];
    dir[j] = (m1[j] / c1) / (std::sqrt(v1[j] / c2) + adam.eps);
  }
  record_packed_step(problem, state, dir, t0);
  // Trial candidates never touch the moments; the applied step commits them.
  adam.m = std::move(m1);
  adam.v = std::move(v1);
  adam.t = t;
}

void lsgd_step(const DiscreteProblem& problem, TrainState& state) {
  const auto t0 = Clock::now();
  NetworkParams& params = state.params;
  const int n = params.n;
  const int d = params.d;

  DenseMatrix K;
  std::vector<double> beta;
  assemble_system(problem, params.omega, params.b, K, beta);
  params.a = dense_lstsq(K, beta);

  std::vector<double> g = energy_gradient(problem, params);
  const SubspaceSplit split = SubspaceSplit::of(n, d);
  for (std::size_t j = split.a_begin(); j < split.a_end(); ++j) g[j] = 0.0;
  record_packed_step(problem, state, g, t0);
}

}  // namespace npsc
