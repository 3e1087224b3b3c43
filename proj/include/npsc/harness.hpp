#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "npsc/forms.hpp"
#include "npsc/rng.hpp"
#include "npsc/trainers.hpp"

namespace npsc {

struct ExperimentConfig {
  std::string problem = "ex1";  // illcond | ex1..ex6
  std::string algo = "npsc";    // npsc | gd | adam | lsgd
  int neurons = 32;
  int epochs = 1000;
  int seeds = 1;
  std::uint64_t master_seed = 1;
  std::size_t quad_points = 0;  // 0 = problem default
  std::string precond = "full";  // full | diag | none
  std::string out;               // CSV base path; empty = no files
  void validate() const;
};

struct ProblemSetup {
  std::string id;
  int d = 1;
  DiscreteProblem problem;
  ScalarField exact;        // u* handle
  std::vector<double> exact_vals;  // u* at rule points
  double e_star = 0.0;      // energy of the exact solution
};

/// Builds the quadrature, form, source and reference solution for an
/// experiment id. N = 0 picks the experiment's default point count.
ProblemSetup make_problem(const std::string& id, std::size_t N = 0);

NetworkParams he_initialize(int n, int d, RngStream& rng);

double l2_error(const DiscreteProblem& problem, const NetworkParams& params,
                const ScalarField& exact);
double l2_error(const DiscreteProblem& problem, const NetworkParams& params,
                std::span<const double> exact_vals);

struct RunRecord {
  std::vector<EpochStats> rows;           // length T
  std::vector<double> rel_energy_err;     // length T
  std::vector<double> l2_err;             // length T
  NetworkParams final_params;
};

struct RunSummary {
  std::vector<RunRecord> per_seed;
  std::vector<double> mean_rel_err, median_rel_err;  // per epoch
  std::vector<double> mean_l2, median_l2;            // per epoch
  std::vector<std::string> files;
};

/// Trains every seed, computes metrics and (when out is set) writes one CSV
/// per seed plus a _mean aggregate.
RunSummary run(const ExperimentConfig& config);

struct IllcondResult {
  double kappa = 0.0;
  std::vector<double> gd_rel_err;    // per iteration
  std::vector<double> adam_rel_err;  // per iteration
};

/// Fixed-node quadratic demonstration: GD at the optimal rate and Adam on the
/// linear-layer system, plus the condition number of its matrix.
IllcondResult illcond_demo(int n, int iters);

/// Assembles the fixed-node linear-layer matrix of the demonstration
/// (omega_i = 1, b_i = -(i-1)/n) and its right-hand side.
void illcond_system(int n, std::size_t N, DenseMatrix& M, std::vector<double>& beta);

struct PrecondTableRow {
  int n = 0;
  int cg_iters = 0;
  int pcg_iters = 0;
  long gd_iters = -1;    // -1 = not measured
  long adam_iters = -1;  // capped at 500000
};

/// Iteration counts for the fixed-node a-problems (omega_i = 1,
/// b_i = -i/(n+1)) on ex2 or ex3 across n = 2^4..2^8.
std::vector<PrecondTableRow> precond_table(const std::string& problem_id,
                                           bool with_gd_adam = false);

std::string csv_path_with_suffix(const std::string& base, const std::string& suffix);

}  // namespace npsc
