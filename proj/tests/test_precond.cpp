#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "npsc/forms.hpp"
#include "npsc/precond.hpp"
#include "npsc/rng.hpp"
#include "precond_oracles.hpp"

using namespace npsc;
namespace oracle = npsc::testing;

namespace {

DiscreteProblem l2_unit(std::size_t N) {
  BilinearForm form;
  form.kind = FormKind::L2;
  form.domain = BoxDomain::unit(1);
  return DiscreteProblem::make(form, trapezoid_rule(N),
                               [](std::span<const double>) { return 0.0; });
}

DiscreteProblem h1_unit(std::size_t N) {
  BilinearForm form;
  form.kind = FormKind::H1;
  form.domain = BoxDomain::unit(1);
  form.alpha = [](std::span<const double> x) { return 2.0 + std::sin(3.0 * x[0]); };
  return DiscreteProblem::make(form, trapezoid_rule(N),
                               [](std::span<const double>) { return 0.0; });
}

double rel_err(std::span<const double> got, std::span<const double> want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace

TEST_CASE("analyze_nodes: interior ramps in order") {
  std::vector<double> omega{1.0, 1.0, 1.0}, b{-0.25, -0.5, -0.75};
  NodeAnalysis a = analyze_nodes(omega, b, BoxDomain::unit(1));
  CHECK(a.n_interior == 3);
  CHECK(a.nodes == std::vector<double>{0.25, 0.5, 0.75});
  CHECK(a.order == std::vector<int>{0, 1, 2});
}

TEST_CASE("analyze_nodes: one exterior neuron with boundary values") {
  std::vector<double> omega{1.0, 1.0}, b{-0.5, 0.2};
  NodeAnalysis a = analyze_nodes(omega, b, BoxDomain::unit(1));
  CHECK(a.n_interior == 1);
  CHECK(a.nodes[0] == doctest::Approx(0.5));
  REQUIRE(a.ext_at0.size() == 1);
  CHECK(a.ext_at0[0] == doctest::Approx(0.2));
  CHECK(a.ext_at1[0] == doctest::Approx(1.2));
}

TEST_CASE("analyze_nodes: three exterior neurons violate the assumptions") {
  std::vector<double> omega{1.0, 1.0, 1.0}, b{0.1, 0.2, 0.3};
  CHECK_THROWS_AS(analyze_nodes(omega, b, BoxDomain::unit(1)),
                  assumption_violation_error);
}

TEST_CASE("analyze_nodes: zero neuron and zero slope are rejected") {
  CHECK_THROWS_AS(analyze_nodes(std::vector<double>{1.0}, std::vector<double>{-2.0},
                                BoxDomain::unit(1)),
                  assumption_violation_error);
  CHECK_THROWS_AS(analyze_nodes(std::vector<double>{0.0}, std::vector<double>{1.0},
                                BoxDomain::unit(1)),
                  assumption_violation_error);
}

TEST_CASE("hat Gram with uniform nodes matches direct quadrature and h/3 pattern") {
  DiscreteProblem problem = l2_unit(10000);
  const int nO = 7;
  std::vector<double> omega(nO, 1.0), b(nO);
  const double h = 1.0 / (nO + 1);
  for (int i = 0; i < nO; ++i) b[i] = -(i + 1) * h;
  NodeAnalysis a = analyze_nodes(omega, b, BoxDomain::unit(1));
  // the two modes coincide for L2 forms
  PreconditionerData data = build_preconditioner(problem, a);
  PreconditionerData data_s = build_preconditioner(problem, a, HatGramMode::sampled);
  CHECK(data.hat_gram.diag == data_s.hat_gram.diag);
  CHECK(data.hat_gram.upper == data_s.hat_gram.upper);

  DenseMatrix G = oracle::dense_hat_gram_basis_order(a, problem);
  // production stores spatial ordering; compare band entries
  for (int j = 0; j < data.m; ++j) {
    const int pj = oracle::hat_spatial_to_basis(nO, j);
    CHECK(std::abs(data.hat_gram.diag[j] - G(pj, pj)) <= 1e-10);
    if (j + 1 < data.m) {
      const int pj1 = oracle::hat_spatial_to_basis(nO, j + 1);
      CHECK(std::abs(data.hat_gram.upper[j] - G(pj, pj1)) <= 1e-10);
    }
  }
  // classical mass-matrix pattern: 2h/3 interior diagonal, h/6 off-diagonal
  for (int j = 1; j + 1 < data.m; ++j)
    CHECK(data.hat_gram.diag[j] == doctest::Approx(2.0 * h / 3.0).epsilon(1e-4));
  CHECK(data.hat_gram.diag[0] == doctest::Approx(h / 3.0).epsilon(1e-4));
  for (int j = 0; j + 1 < data.m; ++j)
    CHECK(data.hat_gram.upper[j] == doctest::Approx(h / 6.0).epsilon(1e-4));
}

TEST_CASE("hat Gram stiffness band: analytic 2 alpha / h pattern") {
  BilinearForm h1f;
  h1f.kind = FormKind::H1;
  h1f.domain = BoxDomain::unit(1);
  h1f.alpha = [](std::span<const double>) { return 2.0; };
  DiscreteProblem mh1 = DiscreteProblem::make(
      h1f, trapezoid_rule(501), [](std::span<const double>) { return 0.0; });

  const int nO = 7;
  std::vector<double> omega(nO, 1.0), b(nO);
  const double h = 1.0 / (nO + 1);
  for (int i = 0; i < nO; ++i) b[i] = -(i + 1) * h;
  NodeAnalysis a = analyze_nodes(omega, b, BoxDomain::unit(1));

  PreconditionerData dh1 = build_preconditioner(mh1, a, HatGramMode::exact_stiffness);
  for (int j = 1; j + 1 < dh1.m; ++j)
    CHECK(dh1.hat_gram.diag[j] ==
          doctest::Approx(2.0 * h / 3.0 + 2.0 * 2.0 / h).epsilon(1e-5));
  for (int j = 0; j + 1 < dh1.m; ++j)
    CHECK(dh1.hat_gram.upper[j] == doctest::Approx(h / 6.0 - 2.0 / h).epsilon(1e-5));
}

TEST_CASE("hat reconstruction: B Psi-bar hits 1 at the own node, 0 elsewhere") {
  RngStream rng(61);
  NetworkParams p = oracle::random_admissible(12, 1, rng);
  NodeAnalysis a = analyze_nodes(p.omega, p.b, BoxDomain::unit(1));
  DenseMatrix B = oracle::dense_B(a);
  const int nO = a.n_interior;
  const int m = nO + 2;
  std::vector<double> psi(m);
  for (int jnode = 0; jnode < nO; ++jnode) {
    const double x = a.nodes[jnode];
    for (int k = 0; k < m; ++k) psi[k] = oracle::psi_bar_val(a, k, x);
    for (int i = 0; i < nO; ++i) {
      double v = 0.0;
      for (int k = 0; k < m; ++k) v += B(i, k) * psi[k];
      CHECK(std::abs(v - (i == jnode ? 1.0 : 0.0)) <= 1e-10);
    }
  }
}

TEST_CASE("basis identity: Phi-bar = B Psi-bar pointwise, values and slopes") {
  RngStream rng(67);
  for (int n_ext : {0, 1, 2}) {
    NetworkParams p = oracle::random_admissible(14, n_ext, rng);
    NodeAnalysis a = analyze_nodes(p.omega, p.b, BoxDomain::unit(1));
    DenseMatrix B = oracle::dense_B(a);
    const int nO = a.n_interior;
    const int m = nO + 2;
    const std::vector<double> grid = oracle::hat_grid(a);
    for (int t = 0; t < 1000; ++t) {
      const double x = rng.next_unit();
      for (int i = 0; i < m; ++i) {
        double v = 0.0, dv = 0.0;
        for (int k = 0; k < m; ++k) {
          v += B(i, k) * oracle::psi_bar_val(a, k, x);
          dv += B(i, k) * oracle::psi_bar_deriv(a, k, x);
        }
        const int j = oracle::hat_basis_to_spatial(nO, i);
        CHECK(std::abs(v - oracle::hat_val(grid, j, x)) <= 1e-10);
        CHECK(std::abs(dv - oracle::hat_deriv(grid, j, x)) <= 1e-8);
      }
    }
  }
}

TEST_CASE("stiffness identity: K = R Kbar R^T under shared quadrature") {
  RngStream rng(71);
  for (bool h1 : {false, true}) {
    DiscreteProblem problem = h1 ? h1_unit(3000) : l2_unit(3000);
    for (int n_ext : {0, 1, 2}) {
      NetworkParams p = oracle::random_admissible(16, n_ext, rng);
      NodeAnalysis a = analyze_nodes(p.omega, p.b, BoxDomain::unit(1));
      const int n = p.n;
      const int m = a.n_interior + 2;

      // K over the sorted neurons
      std::vector<double> omega_s(n), b_s(n);
      for (int pos = 0; pos < n; ++pos) {
        omega_s[pos] = p.omega[a.order[pos]];
        b_s[pos] = p.b[a.order[pos]];
      }
      DenseMatrix K;
      std::vector<double> beta;
      assemble_system(problem, omega_s, b_s, K, beta);

      // Kbar = Gram of the augmented basis, by the same quadrature
      DenseMatrix Kbar(m, m);
      for (std::size_t q = 0; q < problem.points(); ++q) {
        const double x = problem.rule.coords[q];
        const double w = problem.rule.weights[q];
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < m; ++c) {
            double add = w * oracle::psi_bar_val(a, r, x) * oracle::psi_bar_val(a, c, x);
            if (h1)
              add += problem.w_alpha[q] * oracle::psi_bar_deriv(a, r, x) *
                     oracle::psi_bar_deriv(a, c, x);
            Kbar(r, c) += add;
          }
      }
      DenseMatrix R = oracle::dense_R(a);
      double num = 0.0, den = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c) s += R(i, r) * Kbar(r, c) * R(j, c);
          num += (K(i, j) - s) * (K(i, j) - s);
          den += K(i, j) * K(i, j);
        }
      CHECK(std::sqrt(num / den) <= 1e-10);
    }
  }
}

TEST_CASE("apply_B1_inverse: unit slopes give the identity") {
  DiscreteProblem problem = l2_unit(200);
  std::vector<double> omega{1.0, 1.0, 1.0}, b{-0.2, -0.5, -0.8};
  NodeAnalysis a = analyze_nodes(omega, b, BoxDomain::unit(1));
  PreconditionerData data = build_preconditioner(problem, a);
  std::vector<double> alpha{1.0, -2.0, 3.0, 0.5, -0.5}, out(5);
  apply_B1_inverse(data, alpha, out);
  for (int i = 0; i < 5; ++i) CHECK(out[i] == doctest::Approx(alpha[i]));
}

TEST_CASE("apply_B1_inverse: mixed slopes against dense solve, inverse property") {
  RngStream rng(73);
  DiscreteProblem problem = l2_unit(200);
  std::vector<double> omega{2.0, -1.5, 0.7}, b;
  std::vector<double> nodes{0.3, 0.55, 0.8};
  for (int i = 0; i < 3; ++i) b.push_back(-omega[i] * nodes[i]);
  NodeAnalysis a = analyze_nodes(omega, b, BoxDomain::unit(1));
  PreconditionerData data = build_preconditioner(problem, a);
  DenseMatrix B1 = oracle::dense_B1(a);
  const int m = 5;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> alpha(m), out(m);
    for (double& v : alpha) v = rng.normal();
    apply_B1_inverse(data, alpha, out);
    std::vector<double> want = dense_solve(B1, alpha);
    CHECK(rel_err(out, want) <= 1e-12);
    // inverse property: B1 * out == alpha
    std::vector<double> back = matvec(B1, out);
    for (int i = 0; i < m; ++i) CHECK(back[i] == doctest::Approx(alpha[i]).epsilon(1e-12));
  }
}

TEST_CASE("apply_P matches the dense oracle over all gamma branches") {
  RngStream rng(79);
  DiscreteProblem pl2 = l2_unit(1500);
  DiscreteProblem ph1 = h1_unit(1500);
  for (HatGramMode mode : {HatGramMode::exact_stiffness, HatGramMode::sampled}) {
    for (bool h1 : {false, true}) {
      const DiscreteProblem& problem = h1 ? ph1 : pl2;
      for (int n_ext : {0, 1, 2}) {
        for (int rep = 0; rep < 3; ++rep) {
          const int n = 6 + 2 * rep;
          NetworkParams p = oracle::random_admissible(n, n_ext, rng);
          NodeAnalysis a = analyze_nodes(p.omega, p.b, BoxDomain::unit(1));
          REQUIRE(a.n_interior == n - n_ext);
          PreconditionerData data = build_preconditioner(problem, a, mode);
          std::vector<double> alpha(n), got(n);
          for (double& v : alpha) v = rng.normal();
          apply_P(data, alpha, got);
          std::vector<double> want =
              oracle::dense_apply_P(a, problem, alpha, false, mode);
          CHECK(rel_err(got, want) <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("apply_Pdiag matches its dense oracle and rejects H1 forms") {
  RngStream rng(83);
  DiscreteProblem problem = l2_unit(1500);
  for (int n_ext : {0, 1, 2}) {
    NetworkParams p = oracle::random_admissible(10, n_ext, rng);
    NodeAnalysis a = analyze_nodes(p.omega, p.b, BoxDomain::unit(1));
    PreconditionerData data = build_preconditioner(problem, a);
    std::vector<double> alpha(10), got(10);
    for (double& v : alpha) v = rng.normal();
    apply_Pdiag(data, alpha, got);
    std::vector<double> want = oracle::dense_apply_P(a, problem, alpha, true);
    CHECK(rel_err(got, want) <= 1e-10);
  }
  DiscreteProblem ph1 = h1_unit(400);
  NetworkParams p = oracle::random_admissible(6, 0, rng);
  NodeAnalysis a = analyze_nodes(p.omega, p.b, BoxDomain::unit(1));
  PreconditionerData data = build_preconditioner(ph1, a);
  std::vector<double> alpha(6, 1.0), out(6);
  CHECK_THROWS_AS(apply_Pdiag(data, alpha, out), std::invalid_argument);
}

TEST_CASE("apply_P is linear and SPD") {
  RngStream rng(89);
  DiscreteProblem problem = l2_unit(2000);
  NetworkParams p = oracle::random_admissible(20, 1, rng);
  NodeAnalysis a = analyze_nodes(p.omega, p.b, BoxDomain::unit(1));
  PreconditionerData data = build_preconditioner(problem, a);
  const int n = 20;
  std::vector<double> x(n), y(n), sum(n), px(n), py(n), psum(n);
  for (int trial = 0; trial < 20; ++trial) {
    for (int i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
      sum[i] = x[i] + y[i];
    }
    apply_P(data, x, px);
    apply_P(data, y, py);
    apply_P(data, sum, psum);
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(psum[i]));
    for (int i = 0; i < n; ++i)
      CHECK(std::abs(psum[i] - px[i] - py[i]) <= 1e-12 * std::max(1.0, scale));
  }
  for (int trial = 0; trial < 100; ++trial) {
    for (int i = 0; i < n; ++i) x[i] = rng.normal();
    apply_P(data, x, px);
    double xpx = 0.0;
    for (int i = 0; i < n; ++i) xpx += x[i] * px[i];
    CHECK(xpx > 0.0);
  }
}

TEST_CASE("kappa(P K) stays uniformly bounded across n") {
  RngStream rng(97);
  DiscreteProblem problem = l2_unit(4000);
  std::vector<double> kappas;
  for (int n : {16, 32, 64}) {
    NetworkParams p = oracle::random_admissible(n, 1, rng);
    NodeAnalysis a = analyze_nodes(p.omega, p.b, BoxDomain::unit(1));
    std::vector<double> omega_s(n), b_s(n);
    for (int pos = 0; pos < n; ++pos) {
      omega_s[pos] = p.omega[a.order[pos]];
      b_s[pos] = p.b[a.order[pos]];
    }
    PreconditionerData data = build_preconditioner(problem, a);
    DenseMatrix K;
    std::vector<double> beta;
    assemble_system(problem, omega_s, b_s, K, beta);
    // dense P from unit vectors, then eigenvalues of L^T K L with P = L L^T
    DenseMatrix P(n, n);
    std::vector<double> e(n, 0.0), col(n);
    for (int c = 0; c < n; ++c) {
      std::fill(e.begin(), e.end(), 0.0);
      e[c] = 1.0;
      apply_P(data, e, col);
      for (int r = 0; r < n; ++r) P(r, c) = col[r];
    }
    // Cholesky of P
    DenseMatrix L(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        double s = P(i, j);
        for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
        if (i == j) {
          REQUIRE(s > 0.0);
          L(i, i) = std::sqrt(s);
        } else {
          L(i, j) = s / L(j, j);
        }
      }
    DenseMatrix S(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < n; ++c) s += L(r, i) * K(r, c) * L(c, j);
        S(i, j) = s;
      }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double sym = 0.5 * (S(i, j) + S(j, i));
        S(i, j) = sym;
        S(j, i) = sym;
      }
    std::vector<double> eig = symmetric_eigenvalues(S);
    kappas.push_back(eig.back() / eig.front());
  }
  const double lo = *std::min_element(kappas.begin(), kappas.end());
  const double hi = *std::max_element(kappas.begin(), kappas.end());
  CHECK(hi / lo < 3.0);
  CHECK(hi < 100.0);
}

TEST_CASE("grids finer than the sampling are reported, not silently inverted") {
  DiscreteProblem problem = l2_unit(101);
  // three kinks closer than any quadrature spacing
  std::vector<double> omega{1.0, 1.0, 1.0, 1.0};
  std::vector<double> b{-0.5, -0.5, -0.5, -0.9};
  NodeAnalysis a = analyze_nodes(omega, b, BoxDomain::unit(1));
  CHECK(a.nodes[0] < a.nodes[1]);
  CHECK(a.nodes[1] < a.nodes[2]);  // tie perturbation produced a strict order
  CHECK_THROWS_AS(build_preconditioner(problem, a), degenerate_grid_error);
}

TEST_CASE("parallel exterior neurons make the gamma system singular") {
  DiscreteProblem problem = l2_unit(301);
  std::vector<double> omega{1.0, 1.0, 1.0}, b{-0.5, 0.25, 0.25};
  NodeAnalysis a = analyze_nodes(omega, b, BoxDomain::unit(1));
  REQUIRE(a.n_interior == 1);
  PreconditionerData data = build_preconditioner(problem, a);
  std::vector<double> alpha{1.0, 2.0, 3.0}, out(3);
  CHECK_THROWS_AS(apply_P(data, alpha, out), assumption_violation_error);
}
