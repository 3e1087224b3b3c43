#include "npsc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "npsc/kernels.hpp"
#include "npsc/precond.hpp"

namespace npsc {

namespace {

namespace k = kernels;
constexpr double kPi = std::numbers::pi;

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

// E* = 1/2 a(u*, u*) - (f, u*) by quadrature, from analytic value/gradient.
double exact_energy(const DiscreteProblem& problem, const ScalarField& u,
                    const std::vector<ScalarField>& grad_u) {
  const std::size_t N = problem.points();
  const int d = problem.rule.d;
  std::vector<double> uv(N), x(d);
  for (std::size_t q = 0; q < N; ++q) {
    problem.rule.point(q, x);
    uv[q] = u(x);
  }
  const double* w = problem.rule.weights.data();
  double e = 0.5 * k::dot3(w, uv.data(), uv.data(), N) -
             k::dot3(w, problem.f_vals.data(), uv.data(), N);
  if (problem.h1()) {
    std::vector<double> gv(N);
    for (int c = 0; c < d; ++c) {
      for (std::size_t q = 0; q < N; ++q) {
        problem.rule.point(q, x);
        gv[q] = grad_u[c](x);
      }
      e += 0.5 * k::dot3(problem.w_alpha.data(), gv.data(), gv.data(), N);
    }
  }
  return e;
}

ProblemSetup finish_setup(std::string id, DiscreteProblem problem, ScalarField exact,
                          std::vector<ScalarField> exact_grad) {
  ProblemSetup s;
  s.id = std::move(id);
  s.d = problem.rule.d;
  s.e_star = exact_energy(problem, exact, exact_grad);
  s.exact_vals.resize(problem.points());
  std::vector<double> x(s.d);
  for (std::size_t q = 0; q < problem.points(); ++q) {
    problem.rule.point(q, x);
    s.exact_vals[q] = exact(x);
  }
  s.problem = std::move(problem);
  s.exact = std::move(exact);
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  require(neurons >= 1, "config: neurons must be >= 1");
  require(epochs >= 1, "config: epochs must be >= 1");
  require(seeds >= 1, "config: seeds must be >= 1");
  require(quad_points == 0 || quad_points >= 2, "config: quad_points must be >= 2");
  require(problem == "illcond" || problem == "ex1" || problem == "ex2" ||
              problem == "ex3" || problem == "ex4" || problem == "ex5" ||
              problem == "ex6",
          "config: unknown problem id");
  require(algo == "npsc" || algo == "gd" || algo == "adam" || algo == "lsgd",
          "config: unknown algorithm");
  require(precond == "full" || precond == "diag" || precond == "none",
          "config: unknown preconditioner choice");
}

/// Piecewise oscillatory target shared by ex2 and the ill-conditioning demo.
static double ex2_source(double x) {
  if (x < 0.5)
    return 10.0 * (std::sin(2.0 * kPi * x) + std::sin(6.0 * kPi * x));
  return 10.0 * (std::sin(8.0 * kPi * x) + std::sin(18.0 * kPi * x) +
                 std::sin(26.0 * kPi * x));
}

ProblemSetup make_problem(const std::string& id, std::size_t N) {
  if (N == 0) N = id == "ex6" ? 20000 : 10000;

  if (id == "ex1" || id == "ex2" || id == "illcond") {
    BilinearForm form;
    form.kind = FormKind::L2;
    form.domain = BoxDomain::unit(1);
    ScalarField f;
    if (id == "ex1")
      f = [](std::span<const double> x) { return std::sin(2.0 * kPi * x[0]); };
    else
      f = [](std::span<const double> x) { return ex2_source(x[0]); };
    DiscreteProblem problem = DiscreteProblem::make(form, trapezoid_rule(N), f);
    return finish_setup(id, std::move(problem), f, {});
  }
  if (id == "ex3") {
    BilinearForm form;
    form.kind = FormKind::H1;
    form.domain = BoxDomain::unit(1);
    form.alpha = [](std::span<const double>) { return 1.0; };
    ScalarField f = [](std::span<const double> x) {
      return (1.0 + 9.0 * kPi * kPi) * std::cos(3.0 * kPi * x[0]) +
             (1.0 + 121.0 * kPi * kPi) * std::cos(11.0 * kPi * x[0]);
    };
    ScalarField u = [](std::span<const double> x) {
      return std::cos(3.0 * kPi * x[0]) + std::cos(11.0 * kPi * x[0]);
    };
    ScalarField du = [](std::span<const double> x) {
      return -3.0 * kPi * std::sin(3.0 * kPi * x[0]) -
             11.0 * kPi * std::sin(11.0 * kPi * x[0]);
    };
    return finish_setup(id, DiscreteProblem::make(form, trapezoid_rule(N), f), u, {du});
  }
  if (id == "ex4") {
    BilinearForm form;
    form.kind = FormKind::H1;
    form.domain = BoxDomain::unit(2);
    form.alpha = [](std::span<const double>) { return 1.0; };
    ScalarField f = [](std::span<const double> x) {
      return (1.0 + 2.0 * kPi * kPi) * std::cos(kPi * x[0]) * std::cos(kPi * x[1]);
    };
    ScalarField u = [](std::span<const double> x) {
      return std::cos(kPi * x[0]) * std::cos(kPi * x[1]);
    };
    ScalarField du0 = [](std::span<const double> x) {
      return -kPi * std::sin(kPi * x[0]) * std::cos(kPi * x[1]);
    };
    ScalarField du1 = [](std::span<const double> x) {
      return -kPi * std::cos(kPi * x[0]) * std::sin(kPi * x[1]);
    };
    return finish_setup(id, DiscreteProblem::make(form, halton_rule(N, 2), f), u,
                        {du0, du1});
  }
  if (id == "ex5") {
    BilinearForm form;
    form.kind = FormKind::H1;
    form.domain = BoxDomain::unit(1);
    form.alpha = [](std::span<const double> x) {
      return std::sin(6.0 * kPi * x[0]) + 2.0;
    };
    // u = cos 12 pi x + cos 16 pi x; f = -(alpha u')' + u expanded by hand.
    ScalarField f = [](std::span<const double> xs) {
      const double x = xs[0];
      const double alpha = std::sin(6.0 * kPi * x) + 2.0;
      const double pp = kPi * kPi;
      return alpha * (144.0 * pp * std::cos(12.0 * kPi * x) +
                      256.0 * pp * std::cos(16.0 * kPi * x)) +
             72.0 * pp * std::cos(6.0 * kPi * x) * std::sin(12.0 * kPi * x) +
             96.0 * pp * std::cos(6.0 * kPi * x) * std::sin(16.0 * kPi * x) +
             std::cos(12.0 * kPi * x) + std::cos(16.0 * kPi * x);
    };
    ScalarField u = [](std::span<const double> x) {
      return std::cos(12.0 * kPi * x[0]) + std::cos(16.0 * kPi * x[0]);
    };
    ScalarField du = [](std::span<const double> x) {
      return -12.0 * kPi * std::sin(12.0 * kPi * x[0]) -
             16.0 * kPi * std::sin(16.0 * kPi * x[0]);
    };
    return finish_setup(id, DiscreteProblem::make(form, trapezoid_rule(N), f), u, {du});
  }
  if (id == "ex6") {
    BilinearForm form;
    form.kind = FormKind::H1;
    form.domain = BoxDomain::unit(2);
    form.alpha = [](std::span<const double> x) {
      return std::sin(6.0 * kPi * x[0]) + 2.0;
    };
    // u = cos pi x1 cos pi x2 with alpha varying in x1 only.
    ScalarField f = [](std::span<const double> x) {
      const double alpha = std::sin(6.0 * kPi * x[0]) + 2.0;
      const double pp = kPi * kPi;
      return 6.0 * pp * std::cos(6.0 * kPi * x[0]) * std::sin(kPi * x[0]) *
                 std::cos(kPi * x[1]) +
             (2.0 * alpha * pp + 1.0) * std::cos(kPi * x[0]) * std::cos(kPi * x[1]);
    };
    ScalarField u = [](std::span<const double> x) {
      return std::cos(kPi * x[0]) * std::cos(kPi * x[1]);
    };
    ScalarField du0 = [](std::span<const double> x) {
      return -kPi * std::sin(kPi * x[0]) * std::cos(kPi * x[1]);
    };
    ScalarField du1 = [](std::span<const double> x) {
      return -kPi * std::cos(kPi * x[0]) * std::sin(kPi * x[1]);
    };
    return finish_setup(id, DiscreteProblem::make(form, halton_rule(N, 2), f), u,
                        {du0, du1});
  }
  throw std::invalid_argument("make_problem: unknown id " + id);
}

NetworkParams he_initialize(int n, int d, RngStream& rng) {
  NetworkParams p(n, d);
  const double sa = std::sqrt(2.0 / static_cast<double>(n));
  const double sw = std::sqrt(2.0 / static_cast<double>(d));
  for (int i = 0; i < n; ++i) {
    p.a[i] = rng.normal(0.0, sa);
    for (int c = 0; c < d; ++c) p.omega_row(i)[c] = rng.normal(0.0, sw);
    p.b[i] = rng.normal(0.0, sw);
  }
  return p;
}

double l2_error(const DiscreteProblem& problem, const NetworkParams& params,
                std::span<const double> exact_vals) {
  const std::size_t N = problem.points();
  require(exact_vals.size() == N, "l2_error: exact sample length mismatch");
  SampledNetwork cache =
      sample_network(problem.rule, params.omega, params.b, params.n, params.d);
  std::vector<double> diff(N, 0.0);
  for (int i = 0; i < params.n; ++i)
    k::axpy(params.a[i], cache.psi.data() + static_cast<std::size_t>(i) * N,
            diff.data(), N);
  for (std::size_t q = 0; q < N; ++q) diff[q] -= exact_vals[q];
  return std::sqrt(k::dot3(problem.rule.weights.data(), diff.data(), diff.data(), N));
}

double l2_error(const DiscreteProblem& problem, const NetworkParams& params,
                const ScalarField& exact) {
  std::vector<double> vals(problem.points());
  std::vector<double> x(problem.rule.d);
  for (std::size_t q = 0; q < problem.points(); ++q) {
    problem.rule.point(q, x);
    vals[q] = exact(x);
  }
  return l2_error(problem, params, vals);
}

std::string csv_path_with_suffix(const std::string& base, const std::string& suffix) {
  const std::size_t dot = base.rfind('.');
  const std::size_t slash = base.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return base + suffix + ".csv";
  return base.substr(0, dot) + suffix + base.substr(dot);
}

namespace {

void write_seed_csv(const std::string& path, const RunRecord& record) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open CSV for writing: " + path);
  std::fprintf(fp,
               "epoch,energy,rel_energy_err,l2_err,tau,pcg_iters,lm_iters_total,"
               "bt_halvings,wall_ms\n");
  for (std::size_t r = 0; r < record.rows.size(); ++r) {
    const EpochStats& s = record.rows[r];
    std::fprintf(fp, "%zu,%.17g,%.17g,%.17g,%.17g,%d,%ld,%d,%.3f\n", r + 1, s.energy,
                 record.rel_energy_err[r], record.l2_err[r], s.tau, s.pcg_iters,
                 s.lm_iters_total, s.bt_halvings, s.wall_ms);
  }
  std::fclose(fp);
}

void write_mean_csv(const std::string& path, const RunSummary& summary) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open CSV for writing: " + path);
  std::fprintf(fp,
               "epoch,rel_energy_err_mean,rel_energy_err_median,l2_err_mean,"
               "l2_err_median\n");
  for (std::size_t r = 0; r < summary.mean_rel_err.size(); ++r)
    std::fprintf(fp, "%zu,%.17g,%.17g,%.17g,%.17g\n", r + 1, summary.mean_rel_err[r],
                 summary.median_rel_err[r], summary.mean_l2[r], summary.median_l2[r]);
  std::fclose(fp);
}

// The quadratic demonstration problem trained by gd/adam inside run().
RunRecord run_illcond_seed(const ProblemSetup& setup, const ExperimentConfig& config) {
  const int n = config.neurons;
  DenseMatrix M;
  std::vector<double> beta;
  illcond_system(n, setup.problem.points(), M, beta);
  const std::vector<double> a_star = dense_solve(M, beta);
  NetworkParams p(n, 1);
  for (int i = 0; i < n; ++i) {
    p.omega[i] = 1.0;
    p.b[i] = -static_cast<double>(i) / n;
  }
  auto quad_energy = [&](const std::vector<double>& a) {
    std::vector<double> Ma = matvec(M, a);
    return 0.5 * k::dot(a.data(), Ma.data(), a.size()) -
           k::dot(beta.data(), a.data(), a.size());
  };
  const double e_star = quad_energy(a_star);
  const std::vector<double> eig = symmetric_eigenvalues(M);
  const double tau = 2.0 / (eig.front() + eig.back());

  RunRecord record;
  std::vector<double> a(n, 0.0), g(n);
  AdamState adam;
  adam.m.assign(n, 0.0);
  adam.v.assign(n, 0.0);
  const bool use_adam = config.algo == "adam";
  for (int it = 0; it < config.epochs; ++it) {
    std::vector<double> Ma = matvec(M, a);
    for (int i = 0; i < n; ++i) g[i] = Ma[i] - beta[i];
    if (use_adam) {
      adam.t += 1;
      const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.t));
      const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.t));
      for (int i = 0; i < n; ++i) {
        adam.m[i] = adam.beta1 * adam.m[i] + (1.0 - adam.beta1) * g[i];
        adam.v[i] = adam.beta2 * adam.v[i] + (1.0 - adam.beta2) * g[i] * g[i];
        a[i] -= tau * (adam.m[i] / c1) / (std::sqrt(adam.v[i] / c2) + adam.eps);
      }
    } else {
      for (int i = 0; i < n; ++i) a[i] -= tau * g[i];
    }
    EpochStats stats;
    stats.energy = quad_energy(a);
    stats.tau = tau;
    record.rows.push_back(stats);
    record.rel_energy_err.push_back((stats.energy - e_star) / std::abs(e_star));
    p.a = a;
    record.l2_err.push_back(l2_error(setup.problem, p, setup.exact_vals));
  }
  record.final_params = p;
  return record;
}

}  // namespace

RunSummary run(const ExperimentConfig& config) {
  config.validate();
  if (config.problem == "illcond")
    require(config.algo == "gd" || config.algo == "adam",
            "run: the illcond demonstration trains with gd or adam only");
  const ProblemSetup setup = make_problem(config.problem, config.quad_points);
  const int n = config.neurons;
  const int d = setup.d;

  RunSummary summary;
  for (int seed = 0; seed < config.seeds; ++seed) {
    RunRecord record;
    if (config.problem == "illcond") {
      record = run_illcond_seed(setup, config);
    } else {
      RngStream init_rng =
          RngStream::derive(config.master_seed, 0, static_cast<std::uint64_t>(seed), 0);
      NetworkParams params = he_initialize(n, d, init_rng);
      TrainState state = make_state(setup.problem, std::move(params));

      NpscOptions options;
      options.precond = config.precond == "diag"   ? PrecondChoice::diag
                        : config.precond == "none" ? PrecondChoice::none
                                                   : PrecondChoice::full;
      AdamState adam;
      const std::uint64_t seed_master =
          RngStream::derive(config.master_seed, 2, static_cast<std::uint64_t>(seed), 0)
              .next_u64();
      for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.algo == "npsc") {
          TrainRng rng{seed_master, static_cast<std::uint64_t>(epoch)};
          npsc_epoch(setup.problem, state, options, rng);
        } else if (config.algo == "gd") {
          gd_step(setup.problem, state);
        } else if (config.algo == "adam") {
          adam_step(setup.problem, state, adam);
        } else {
          lsgd_step(setup.problem, state);
        }
        record.rows.push_back(state.stats.back());
        record.rel_energy_err.push_back((state.stats.back().energy - setup.e_star) /
                                        std::abs(setup.e_star));
        record.l2_err.push_back(l2_error(setup.problem, state.params, setup.exact_vals));
      }
      record.final_params = state.params;
    }
    if (!config.out.empty()) {
      const std::string path =
          csv_path_with_suffix(config.out, "_seed" + std::to_string(seed));
      write_seed_csv(path, record);
      summary.files.push_back(path);
    }
    summary.per_seed.push_back(std::move(record));
  }

  const std::size_t T = summary.per_seed.front().rows.size();
  summary.mean_rel_err.resize(T);
  summary.median_rel_err.resize(T);
  summary.mean_l2.resize(T);
  summary.median_l2.resize(T);
  for (std::size_t r = 0; r < T; ++r) {
    std::vector<double> rel, l2;
    for (const RunRecord& rec : summary.per_seed) {
      rel.push_back(rec.rel_energy_err[r]);
      l2.push_back(rec.l2_err[r]);
    }
    summary.mean_rel_err[r] = k::sum(rel.data(), rel.size()) / rel.size();
    summary.mean_l2[r] = k::sum(l2.data(), l2.size()) / l2.size();
    summary.median_rel_err[r] = median_of(rel);
    summary.median_l2[r] = median_of(l2);
  }
  if (!config.out.empty()) {
    const std::string path = csv_path_with_suffix(config.out, "_mean");
    write_mean_csv(path, summary);
    summary.files.push_back(path);
  }
  return summary;
}

void illcond_system(int n, std::size_t N, DenseMatrix& M, std::vector<double>& beta) {
  BilinearForm form;
  form.kind = FormKind::L2;
  form.domain = BoxDomain::unit(1);
  DiscreteProblem problem = DiscreteProblem::make(
      form, trapezoid_rule(N),
      [](std::span<const double> x) { return ex2_source(x[0]); });
  std::vector<double> omega(n, 1.0), b(n);
  for (int i = 0; i < n; ++i) b[i] = -static_cast<double>(i) / n;
  assemble_system(problem, omega, b, M, beta);
}

IllcondResult illcond_demo(int n, int iters) {
  require(n <= 256, "illcond_demo: dense eigensolve limited to n <= 2^8");
  IllcondResult result;
  ExperimentConfig config;
  config.problem = "illcond";
  config.neurons = n;
  config.epochs = iters;
  config.seeds = 1;

  DenseMatrix M;
  std::vector<double> beta;
  illcond_system(n, 10000, M, beta);
  result.kappa = condition_number(M);

  config.algo = "gd";
  result.gd_rel_err = run(config).per_seed.front().rel_energy_err;
  config.algo = "adam";
  result.adam_rel_err = run(config).per_seed.front().rel_energy_err;
  return result;
}

std::vector<PrecondTableRow> precond_table(const std::string& problem_id,
                                           bool with_gd_adam) {
  require(problem_id == "ex2" || problem_id == "ex3",
          "precond_table: tables are defined for ex2 and ex3");
  const ProblemSetup setup = make_problem(problem_id, 10000);
  std::vector<PrecondTableRow> rows;
  constexpr int kCap = 500000;
  for (int n : {16, 32, 64, 128, 256}) {
    std::vector<double> omega(n, 1.0), b(n);
    for (int i = 0; i < n; ++i)
      b[i] = -static_cast<double>(i + 1) / static_cast<double>(n + 1);
    DenseMatrix K;
    std::vector<double> beta;
    assemble_system(setup.problem, omega, b, K, beta);
    MatAction apply_K = [&](std::span<const double> in, std::span<double> out) {
      std::vector<double> y = matvec(K, in);
      std::copy(y.begin(), y.end(), out.begin());
    };

    PrecondTableRow row;
    row.n = n;
    std::vector<double> x(n, 0.0);
    row.cg_iters = cg(apply_K, beta, x, 1e-10, kCap).iterations;

    NodeAnalysis analysis = analyze_nodes(omega, b, setup.problem.form.domain);
    PreconditionerData pdata = build_preconditioner(setup.problem, analysis);
    MatAction apply_prec = [&](std::span<const double> in, std::span<double> out) {
      apply_P(pdata, in, out);
    };
    std::fill(x.begin(), x.end(), 0.0);
    row.pcg_iters = pcg(apply_K, apply_prec, beta, x, 1e-10, kCap).iterations;

    if (with_gd_adam) {
      const std::vector<double> eig = symmetric_eigenvalues(K);
      const double tau = 2.0 / (eig.front() + eig.back());
      const double beta_norm = std::sqrt(k::dot(beta.data(), beta.data(), beta.size()));
      // the gradient K a - beta doubles as the stopping residual
      std::vector<double> a(n, 0.0);
      row.gd_iters = kCap;
      for (long it = 0; it <= kCap; ++it) {
        std::vector<double> g = matvec(K, a);
        for (int i = 0; i < n; ++i) g[i] -= beta[i];
        if (std::sqrt(k::dot(g.data(), g.data(), g.size())) / beta_norm < 1e-10) {
          row.gd_iters = it;
          break;
        }
        for (int i = 0; i < n; ++i) a[i] -= tau * g[i];
      }
      AdamState adam;
      adam.m.assign(n, 0.0);
      adam.v.assign(n, 0.0);
      std::fill(a.begin(), a.end(), 0.0);
      row.adam_iters = kCap;
      for (long it = 0; it <= kCap; ++it) {
        std::vector<double> g = matvec(K, a);
        for (int i = 0; i < n; ++i) g[i] -= beta[i];
        if (std::sqrt(k::dot(g.data(), g.data(), g.size())) / beta_norm < 1e-10) {
          row.adam_iters = it;
          break;
        }
        adam.t += 1;
        const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.t));
        const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.t));
        for (int i = 0; i < n; ++i) {
          adam.m[i] = adam.beta1 * adam.m[i] + (1.0 - adam.beta1) * g[i];
          adam.v[i] = adam.beta2 * adam.v[i] + (1.0 - adam.beta2) * g[i] * g[i];
          a[i] -= 1e-3 * (adam.m[i] / c1) / (std::sqrt(adam.v[i] / c2) + adam.eps);
        }
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace npsc
