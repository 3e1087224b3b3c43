#include "npsc/precond.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace npsc {

namespace {

constexpr double kTieTolerance = 1e-12;
constexpr double kTieNudge = 1e-10;

bool is_unit_interval(const BoxDomain& box) {
  return box.d == 1 && box.lower[0] == 0.0 && box.upper[0] == 1.0;
}

}  // namespace

NodeAnalysis analyze_nodes(std::span<const double> omega, std::span<const double> b,
                           const BoxDomain& domain) {
  require(domain.d == 1, "analyze_nodes: one-dimensional domains only");
  require(is_unit_interval(domain), "analyze_nodes: domain must be (0,1)");
  require(omega.size() == b.size(), "analyze_nodes: parameter length mismatch");
  const int n = static_cast<int>(b.size());

  struct Entry {
    double node;
    int index;
  };
  std::vector<Entry> interior, exterior;
  for (int i = 0; i < n; ++i) {
    const double w = omega[i];
    if (w == 0.0)
      throw assumption_violation_error("analyze_nodes: neuron with zero slope");
    const double x = -b[i] / w;
    // Zero on (0,1): positive slope active on x > node, negative on x < node.
    if ((w > 0.0 && x >= 1.0) || (w < 0.0 && x <= 0.0))
      throw assumption_violation_error("analyze_nodes: neuron vanishes on the domain");
    if (x > 0.0 && x < 1.0)
      interior.push_back({x, i});
    else
      exterior.push_back({x, i});
  }
  if (static_cast<int>(exterior.size()) > 2)
    throw assumption_violation_error(
        "analyze_nodes: more than two nodal points outside the domain");

  auto by_node = [](const Entry& l, const Entry& r) {
    return l.node != r.node ? l.node < r.node : l.index < r.index;
  };
  std::sort(interior.begin(), interior.end(), by_node);
  std::sort(exterior.begin(), exterior.end(), by_node);

  NodeAnalysis a;
  a.n = n;
  a.n_interior = static_cast<int>(interior.size());
  a.order.reserve(n);
  a.nodes.reserve(interior.size());
  for (const Entry& e : interior) {
    a.order.push_back(e.index);
    a.nodes.push_back(e.node);
  }
  // Strict ordering: nudge ties upward, keep everything inside (0,1).
  for (std::size_t k = 1; k < a.nodes.size(); ++k) {
    if (a.nodes[k] - a.nodes[k - 1] < kTieTolerance)
      a.nodes[k] = a.nodes[k - 1] + kTieNudge * (1.0 + static_cast<double>(k));
    if (a.nodes[k] >= 1.0) a.nodes[k] = std::nextafter(1.0, 0.0);
  }
  for (const Entry& e : exterior) a.order.push_back(e.index);

  a.slope.resize(n);
  for (int pos = 0; pos < n; ++pos) a.slope[pos] = omega[a.order[pos]];
  for (const Entry& e : exterior) {
    const double w = omega[e.index];
    const double bias = b[e.index];
    a.ext_at0.push_back(std::max(0.0, bias));
    a.ext_at1.push_back(std::max(0.0, w + bias));
  }
  return a;
}

namespace {

// Prefix integral of the coefficient samples over a sorted 1D rule, with
// linear interpolation between samples. alpha_at(x) integrates from the first
// sample point to x.
struct AlphaPrimitive {
  std::vector<double> xs;      // sorted sample coordinates
  std::vector<double> alphas;  // alpha at samples
  std::vector<double> prefix;  // trapezoid prefix integral

  static AlphaPrimitive of(const QuadratureRule& rule, std::span<const double> w_alpha) {
    AlphaPrimitive p;
    const std::size_t N = rule.size;
    p.xs.assign(rule.coord(0).begin(), rule.coord(0).end());
    p.alphas.resize(N);
    for (std::size_t q = 0; q < N; ++q) {
      require(q == 0 || p.xs[q] > p.xs[q - 1],
              "build_preconditioner: rule points must be strictly increasing");
      p.alphas[q] = w_alpha[q] / rule.weights[q];
    }
    p.prefix.resize(N);
    p.prefix[0] = 0.0;
    for (std::size_t q = 1; q < N; ++q)
      p.prefix[q] = p.prefix[q - 1] +
                    0.5 * (p.alphas[q - 1] + p.alphas[q]) * (p.xs[q] - p.xs[q - 1]);
    return p;
  }

  double integral_to(double x) const {
    if (x <= xs.front()) return (x - xs.front()) * alphas.front();
    if (x >= xs.back())
      return prefix.back() + (x - xs.back()) * alphas.back();
    const std::size_t j =
        static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), x) -
                                 xs.begin()) -
        1;
    const double t = (x - xs[j]) / (xs[j + 1] - xs[j]);
    const double alpha_x = alphas[j] + t * (alphas[j + 1] - alphas[j]);
    return prefix[j] + 0.5 * (alphas[j] + alpha_x) * (x - xs[j]);
  }

  double integral(double lo, double hi) const { return integral_to(hi) - integral_to(lo); }
};

// Shared assembly guts. w_alpha empty means an L2 form.
PreconditionerData build_impl(FormKind kind, const QuadratureRule& rule,
                              std::span<const double> w_alpha,
                              const NodeAnalysis& analysis, HatGramMode mode) {
  require(rule.d == 1, "build_preconditioner: one-dimensional rules only");
  const int nO = analysis.n_interior;
  const int m = nO + 2;
  const int colL = nO;      // psi_L position in the basis ordering
  const int colR = nO + 1;  // psi_R position

  PreconditionerData data;
  data.analysis = analysis;
  data.kind = kind;
  data.m = m;

  // B1 from the slope reduction psi_i -> psi_i^+ (unit slopes).
  data.b1_diag.assign(m, 1.0);
  data.b1_colL.assign(nO, 0.0);
  data.b1_colR.assign(nO, 0.0);
  for (int i = 0; i < nO; ++i) {
    const double w = analysis.slope[i];
    const double x = analysis.nodes[i];
    if (w >= 0.0) {
      data.b1_diag[i] = w;
    } else {
      data.b1_diag[i] = -w;
      data.b1_colL[i] = w * (1.0 - x);
      data.b1_colR[i] = -w * x;
    }
  }

  // B2: hats in terms of unit-slope ReLUs, psi_L and psi_R.
  data.b2_rows.assign(m, {});
  auto push = [](PreconditionerData::SparseRow& row, int col, double coeff) {
    row.col[row.count] = col;
    row.coeff[row.count] = coeff;
    ++row.count;
  };
  const auto& x = analysis.nodes;
  for (int i = 0; i < nO; ++i) {
    auto& row = data.b2_rows[i];
    const double left = i == 0 ? 0.0 : x[i - 1];
    const double right = i == nO - 1 ? 1.0 : x[i + 1];
    push(row, i == 0 ? colL : i - 1, 1.0 / (x[i] - left));
    push(row, i, -(right - left) / ((right - x[i]) * (x[i] - left)));
    if (i + 1 < nO) push(row, i + 1, 1.0 / (right - x[i]));
  }
  if (nO > 0) {
    auto& rowL = data.b2_rows[colL];
    push(rowL, colL, -(1.0 - x[0]) / x[0]);
    push(rowL, 0, 1.0 / x[0]);
    push(rowL, colR, 1.0);
    auto& rowR = data.b2_rows[colR];
    push(rowR, nO - 1, 1.0 / (1.0 - x[nO - 1]));
  } else {
    push(data.b2_rows[colL], colR, 1.0);  // phi_L = 1 - x = psi_R
    push(data.b2_rows[colR], colL, 1.0);  // phi_R = x = psi_L
  }

  // Hat Gram in spatial order (phi_L, phi_1, ..., phi_nO, phi_R):
  // tridiagonal by construction.
  std::vector<double> grid(m);
  grid[0] = 0.0;
  for (int i = 0; i < nO; ++i) grid[i + 1] = x[i];
  grid[m - 1] = 1.0;
  data.hat_gram = TridiagonalMatrix(m);
  const bool sampled_stiffness = kind == FormKind::H1 && mode == HatGramMode::sampled;
  std::span<const double> pts = rule.coord(0);
  for (std::size_t q = 0; q < rule.size; ++q) {
    const double xq = pts[q];
    // Cell c with grid[c] < xq <= grid[c+1]; xq = 0 falls into cell 0. The
    // left-sided choice keeps hat derivative samples consistent with the
    // sigma'(0) = 0 convention used for the ReLU bases.
    int c = static_cast<int>(std::upper_bound(grid.begin(), grid.end(),
                                              std::nextafter(xq, -1.0)) -
                             grid.begin()) -
            1;
    c = std::clamp(c, 0, m - 2);
    const double len = grid[c + 1] - grid[c];
    const double hl = (grid[c + 1] - xq) / len;
    const double hr = (xq - grid[c]) / len;
    const double wq = rule.weights[q];
    double mass_ll = wq * hl * hl;
    double mass_rr = wq * hr * hr;
    double mass_lr = wq * hl * hr;
    if (sampled_stiffness) {
      const double slope_sq = w_alpha[q] / (len * len);
      mass_ll += slope_sq;
      mass_rr += slope_sq;
      mass_lr -= slope_sq;
    }
    data.hat_gram.diag[c] += mass_ll;
    data.hat_gram.diag[c + 1] += mass_rr;
    data.hat_gram.upper[c] += mass_lr;
  }
  if (kind == FormKind::H1 && mode == HatGramMode::exact_stiffness) {
    // Derivative products are piecewise constant; integrate them per cell
    // with the coefficient's prefix integral instead of point sampling.
    AlphaPrimitive alpha_int = AlphaPrimitive::of(rule, w_alpha);
    for (int c = 0; c + 1 < m; ++c) {
      const double len = grid[c + 1] - grid[c];
      const double s = alpha_int.integral(grid[c], grid[c + 1]) / (len * len);
      data.hat_gram.diag[c] += s;
      data.hat_gram.diag[c + 1] += s;
      data.hat_gram.upper[c] -= s;
    }
  }
  data.hat_gram.lower = data.hat_gram.upper;
  data.hat_factor = TridiagonalFactor::of(data.hat_gram);
  data.hat_diag_inv.resize(m);
  for (int i = 0; i < m; ++i) {
    if (!(std::abs(data.hat_gram.diag[i]) > 0.0))
      throw degenerate_grid_error("build_preconditioner: empty hat support");
    data.hat_diag_inv[i] = 1.0 / data.hat_gram.diag[i];
  }

  // Trailing two rows of Pbar (and of the diagonal variant): Pbar is
  // symmetric, so row k is Pbar e_k, one O(n) application each.
  std::vector<double> unit(m, 0.0), row(m);
  auto take_row = [&](int k, bool diag, std::vector<double>& dst) {
    std::fill(unit.begin(), unit.end(), 0.0);
    unit[k] = 1.0;
    apply_Pbar(data, unit, row, diag);
    dst = row;
  };
  take_row(colL, false, data.pbar_rowL);
  take_row(colR, false, data.pbar_rowR);
  take_row(colL, true, data.pdiag_rowL);
  take_row(colR, true, data.pdiag_rowR);
  return data;
}

}  // namespace

PreconditionerData build_preconditioner(const BilinearForm& form,
                                        const QuadratureRule& rule,
                                        const NodeAnalysis& analysis,
                                        HatGramMode mode) {
  std::vector<double> w_alpha;
  if (form.kind == FormKind::H1) {
    require(static_cast<bool>(form.alpha), "build_preconditioner: H1 form needs alpha");
    w_alpha.resize(rule.size);
    std::vector<double> x(1);
    for (std::size_t q = 0; q < rule.size; ++q) {
      rule.point(q, x);
      w_alpha[q] = rule.weights[q] * form.alpha(x);
    }
  }
  return build_impl(form.kind, rule, w_alpha, analysis, mode);
}

PreconditionerData build_preconditioner(const DiscreteProblem& problem,
                                        const NodeAnalysis& analysis,
                                        HatGramMode mode) {
  return build_impl(problem.form.kind, problem.rule, problem.w_alpha, analysis, mode);
}

void apply_B1_inverse(const PreconditionerData& data, std::span<const double> alpha,
                      std::span<double> out) {
  const int m = data.m;
  const int nO = m - 2;
  require(static_cast<int>(alpha.size()) == m && static_cast<int>(out.size()) == m,
          "apply_B1_inverse: length mismatch");
  const double aL = alpha[nO];
  const double aR = alpha[nO + 1];
  for (int i = 0; i < nO; ++i) {
    require(data.b1_diag[i] != 0.0, "apply_B1_inverse: zero diagonal");
    out[i] = (alpha[i] - data.b1_colL[i] * aL - data.b1_colR[i] * aR) / data.b1_diag[i];
  }
  out[nO] = aL;
  out[nO + 1] = aR;
}

namespace {

// Solve B1^T w = v: the transpose couples through the trailing two rows.
void apply_B1_inv_T(const PreconditionerData& data, std::span<const double> v,
                    std::span<double> out) {
  const int m = data.m;
  const int nO = m - 2;
  double accL = 0.0, accR = 0.0;
  for (int i = 0; i < nO; ++i) {
    out[i] = v[i] / data.b1_diag[i];
    accL += data.b1_colL[i] * out[i];
    accR += data.b1_colR[i] * out[i];
  }
  out[nO] = v[nO] - accL;
  out[nO + 1] = v[nO + 1] - accR;
}

void apply_B2(const PreconditionerData& data, std::span<const double> v,
              std::span<double> out) {
  const int m = data.m;
  for (int r = 0; r < m; ++r) {
    const auto& row = data.b2_rows[r];
    double s = 0.0;
    for (int e = 0; e < row.count; ++e) s += row.coeff[e] * v[row.col[e]];
    out[r] = s;
  }
}

void apply_B2_T(const PreconditionerData& data, std::span<const double> v,
                std::span<double> out) {
  const int m = data.m;
  std::fill(out.begin(), out.end(), 0.0);
  for (int r = 0; r < m; ++r) {
    const auto& row = data.b2_rows[r];
    for (int e = 0; e < row.count; ++e) out[row.col[e]] += row.coeff[e] * v[r];
  }
}

// basis order <-> spatial order for the hat coefficients
void to_spatial(const PreconditionerData& data, std::span<const double> v,
                std::span<double> out) {
  const int nO = data.m - 2;
  out[0] = v[nO];
  for (int i = 0; i < nO; ++i) out[i + 1] = v[i];
  out[nO + 1] = v[nO + 1];
}

void from_spatial(const PreconditionerData& data, std::span<const double> v,
                  std::span<double> out) {
  const int nO = data.m - 2;
  out[nO] = v[0];
  for (int i = 0; i < nO; ++i) out[i] = v[i + 1];
  out[nO + 1] = v[nO + 1];
}

}  // namespace

void apply_Pbar(const PreconditionerData& data, std::span<const double> y,
                std::span<double> out, bool diag_variant) {
  const int m = data.m;
  require(static_cast<int>(y.size()) == m && static_cast<int>(out.size()) == m,
          "apply_Pbar: length mismatch");
  // reused scratch keeps the application allocation-free and reentrant
  thread_local std::vector<double> t1, t2, t3;
  t1.resize(m);
  t2.resize(m);
  t3.resize(m);
  apply_B1_inverse(data, y, t1);
  apply_B2(data, t1, t2);
  to_spatial(data, t2, t1);
  if (diag_variant) {
    for (int i = 0; i < m; ++i) t1[i] *= data.hat_diag_inv[i];
    from_spatial(data, t1, t2);
  } else {
    data.hat_factor.solve(t1, t3);
    from_spatial(data, t3, t2);
  }
  apply_B2_T(data, t2, t3);
  apply_B1_inv_T(data, t3, out);
}

namespace {

void apply_P_impl(const PreconditionerData& data, std::span<const double> alpha,
                  std::span<double> out, bool diag_variant) {
  const int n = data.analysis.n;
  const int nO = data.analysis.n_interior;
  const int m = data.m;
  require(static_cast<int>(alpha.size()) == n && static_cast<int>(out.size()) == n,
          "apply_P: length mismatch");
  const int n_ext = n - nO;

  const std::vector<double>& rowL = diag_variant ? data.pdiag_rowL : data.pbar_rowL;
  const std::vector<double>& rowR = diag_variant ? data.pdiag_rowR : data.pbar_rowR;

  // Interior dot products with the two precomputed Pbar rows.
  double qL = 0.0, qR = 0.0;
  for (int i = 0; i < nO; ++i) {
    qL += rowL[i] * alpha[i];
    qR += rowR[i] * alpha[i];
  }
  const double GLL = rowL[nO], GLR = rowL[nO + 1];
  const double GRL = rowR[nO], GRR = rowR[nO + 1];

  // gamma so that Pbar [alpha_interior; gamma] is consistent with R.
  double g0 = 0.0, g1 = 0.0;
  auto solve2 = [](double a00, double a01, double a10, double a11, double r0,
                   double r1, double& s0, double& s1) {
    const double det = a00 * a11 - a01 * a10;
    const double scale = std::max({std::abs(a00), std::abs(a01), std::abs(a10),
                                   std::abs(a11), 1e-300});
    if (!(std::abs(det) > 1e-14 * scale * scale))
      throw assumption_violation_error(
          "apply_P: singular gamma system (exterior neurons linearly dependent)");
    s0 = (r0 * a11 - r1 * a01) / det;
    s1 = (a00 * r1 - a10 * r0) / det;
  };

  if (n_ext == 2) {
    solve2(data.analysis.ext_at1[0], data.analysis.ext_at0[0],
           data.analysis.ext_at1[1], data.analysis.ext_at0[1], alpha[nO],
           alpha[nO + 1], g0, g1);
  } else if (n_ext == 1) {
    const double p1 = data.analysis.ext_at1[0];
    const double p0 = data.analysis.ext_at0[0];
    // Cross-multiplied membership condition avoids dividing by small psi(0).
    solve2(p1, p0, GLL * p0 - GRL * p1, GLR * p0 - GRR * p1, alpha[nO],
           qR * p1 - qL * p0, g0, g1);
  } else {
    solve2(GLL, GLR, GRL, GRR, -qL, -qR, g0, g1);
  }

  thread_local std::vector<double> y, z;
  y.resize(m);
  z.resize(m);
  for (int i = 0; i < nO; ++i) y[i] = alpha[i];
  y[nO] = g0;
  y[nO + 1] = g1;
  apply_Pbar(data, y, z, diag_variant);

  for (int i = 0; i < nO; ++i) out[i] = z[i];
  if (n_ext == 2) {
    // R~^T beta_ext = z_last2
    solve2(data.analysis.ext_at1[0], data.analysis.ext_at1[1],
           data.analysis.ext_at0[0], data.analysis.ext_at0[1], z[nO], z[nO + 1],
           out[nO], out[nO + 1]);
  } else if (n_ext == 1) {
    const double p1 = data.analysis.ext_at1[0];
    const double p0 = data.analysis.ext_at0[0];
    out[nO] = (p1 * z[nO] + p0 * z[nO + 1]) / (p1 * p1 + p0 * p0);
  }
}

}  // namespace

void apply_P(const PreconditionerData& data, std::span<const double> alpha,
             std::span<double> out) {
  apply_P_impl(data, alpha, out, false);
}

void apply_Pdiag(const PreconditionerData& data, std::span<const double> alpha,
                 std::span<double> out) {
  require(data.kind == FormKind::L2,
          "apply_Pdiag: diagonal variant is defined for L2 forms only");
  apply_P_impl(data, alpha, out, true);
}

}  // namespace npsc
