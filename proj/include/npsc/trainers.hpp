#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "npsc/forms.hpp"
#include "npsc/neuron.hpp"
#include "npsc/precond.hpp"
#include "npsc/rng.hpp"

namespace npsc {

struct EpochStats {
  double energy = 0.0;
  double tau = 0.0;
  int pcg_iters = 0;
  bool a_converged = true;
  long lm_iters_total = 0;
  int bt_halvings = 0;
  bool accepted = true;
  int resamples = 0;
  double wall_ms = 0.0;
};

/// Per-run training state shared by all trainers.
struct TrainState {
  NetworkParams params;
  double tau = 1.0;  // tau_{k-1}, seeds the next epoch's doubling
  int epoch = 0;
  std::vector<double> energy_history;  // length epoch + 1
  std::vector<EpochStats> stats;       // length epoch
};

TrainState make_state(const DiscreteProblem& problem, NetworkParams params);

constexpr double kTauMin = 1e-12;

/// Per-neuron substreams keyed by (master, epoch, neuron); the draw sequence
/// is identical for every worker count and scheduling order.
struct TrainRng {
  std::uint64_t master = 0;
  std::uint64_t epoch = 0;
  RngStream neuron_stream(std::uint64_t index, std::uint64_t salt = 0) const {
    return RngStream::derive(master, 1 + salt, epoch, index);
  }
};

/// Normalizes every neuron to |omega| = 1 and relocates biases so that no
/// neuron vanishes on the box and at most d+1 are linear on it. Returns the
/// number of resampled parameters.
int adjust_parameters(NetworkParams& params, const BoxDomain& domain,
                      const TrainRng& rng);

struct BacktrackResult {
  double tau = 0.0;
  std::vector<double> omega;
  std::vector<double> b;
  bool accepted = false;
  int halvings = 0;
  double energy = 0.0;  // energy of the returned candidate
};

/// Doubling/halving search for the relaxation weight between the current
/// nonlinear layer and the half-step produced by the neuron solves.
BacktrackResult backtrack(const DiscreteProblem& problem, std::span<const double> a_new,
                          std::span<const double> omega_old, std::span<const double> b_old,
                          std::span<const double> omega_half, std::span<const double> b_half,
                          double tau_prev, int n, int d);

enum class PrecondChoice { full, diag, none };

struct NpscOptions {
  PrecondChoice precond = PrecondChoice::full;
  double pcg_tol = 1e-10;
  LMConfig lm;
  bool use_adjustment = true;  // ablation switch
  bool use_lm = true;          // ablation switch: false = plain descent steps
};

/// One epoch of the neuron-wise parallel subspace correction method:
/// adjustment, exact a-solve, parallel per-neuron solves, backtracked update.
void npsc_epoch(const DiscreteProblem& problem, TrainState& state,
                const NpscOptions& options, const TrainRng& rng);

/// Full-gradient step with backtracked step length.
void gd_step(const DiscreteProblem& problem, TrainState& state);

struct AdamState {
  std::vector<double> m, v;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

/// Adam direction with the global scale chosen by backtracking each epoch;
/// moments commit once per epoch (trial evaluations leave them untouched).
void adam_step(const DiscreteProblem& problem, TrainState& state, AdamState& adam);

/// Exact least-squares solve of the linear layer, then one backtracked
/// gradient step on the nonlinear layer.
void lsgd_step(const DiscreteProblem& problem, TrainState& state);

}  // namespace npsc
