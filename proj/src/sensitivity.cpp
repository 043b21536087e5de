#include "fsisens/sensitivity.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

namespace fsisens {

namespace {

const std::array<std::array<double, 2>, 3> kCorner{{{0, 0}, {1, 0}, {0, 1}}};

int fluid_element_index(const Discretization& disc, int triangle) {
  const auto& elems = disc.velocity().elements;
  return static_cast<int>(std::lower_bound(elems.begin(), elems.end(), triangle) - elems.begin());
}

std::array<double, 2> edge_node_ref(const TaggedEdge& edge, int m) {
  const int k0 = edge.local_edge, k1 = (edge.local_edge + 1) % 3;
  const double s = 0.5 * m;
  return {kCorner[k0][0] + s * (kCorner[k1][0] - kCorner[k0][0]),
          kCorner[k0][1] + s * (kCorner[k1][1] - kCorner[k0][1])};
}

FEFunction add_scaled(const FEFunction& a, double h, const FEFunction& b) {
  FEFunction r = a;
  r.coefficients += h * b.coefficients;
  return r;
}

/// Derivative of the transformed fluid residual at (w_hat, p_hat) with respect to the
/// flow-map displacement, as a sparse matrix (fluid rows, velocity-space columns).
SparseMatrix assemble_shape_jacobian(const Discretization& disc, const TransformFields& fields,
                                     const FluidState& base, double nu) {
  const FESpace& v = disc.velocity();
  const FESpace& ps = disc.pressure();
  const auto& rule = triangle_rule();
  const int off = pressure_offset(disc);
  return assemble_matrix(fluid_size(disc), v.n_dofs(), static_cast<int>(v.elements.size()),
                         [&](int e, LocalMatrix& lm) {
    lm.rows.resize(15);
    lm.cols.resize(12);
    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < 6; ++a) lm.rows[c * 6 + a] = lm.cols[c * 6 + a] = v.dof(v.cell_nodes[e][a], c);
    for (int b = 0; b < 3; ++b) lm.rows[12 + b] = off + ps.cell_nodes[e][b];
    lm.values = Eigen::MatrixXd::Zero(15, 12);
    const auto& g = disc.geometry(v.elements[e]);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto [xi, eta] = rule.points[q];
      const double w = g.area * rule.weights[q];
      const auto k = fields.index(e, static_cast<int>(q));
      const PointTransform pt{fields.dphi[k], fields.J[k], fields.K[k], fields.A[k]};
      const auto N = basis::p2_values(xi, eta);
      const auto dN = p2_physical_gradients(g, xi, eta);
      const auto M = basis::p1_values(xi, eta);
      const auto ws = sample_vector(disc, v, base.w.coefficients, e, xi, eta);
      const double p = sample_scalar(ps, base.p.coefficients, e, xi, eta);
      for (int c = 0; c < 2; ++c)
        for (int b = 0; b < 6; ++b) {
          Mat2 grad = Mat2::Zero();
          grad.row(c) = dN[b].transpose();
          const auto d = transform_derivative_at(pt, grad);
          const Mat2 G = nu * ws.gradient * d.dA.transpose() - p * d.dK;
          const Vec2 s = ws.gradient * d.dK.transpose() * ws.value;
          const double cc = d.dK.cwiseProduct(ws.gradient).sum();
          for (int a = 0; a < 6; ++a)
            for (int i = 0; i < 2; ++i) lm.values(i * 6 + a, c * 6 + b) += w * (G.row(i).dot(dN[a]) + s[i] * N[a]);
          for (int m = 0; m < 3; ++m) lm.values(12 + m, c * 6 + b) += w * cc * M[m];
        }
    }
  });
}

std::vector<int> interface_solid_dofs(const Discretization& disc) {
  const FESpace& s = disc.displacement();
  std::vector<int> out;
  for (int node : interface_nodes(disc))
    for (int c = 0; c < 2; ++c) out.push_back(s.dof(s.scalar_of_global[node], c));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

SensitivitySolver::SensitivitySolver(const FSIProblem& problem, const FSIState& base, TractionMode mode)
    : problem_(&problem),
      base_(&base),
      mode_(mode),
      linear_(problem.disc(), base.fields, base.fluid, problem.nu()) {}

FEFunction SensitivitySolver::extend(const FEFunction& du) const {
  return problem_->extension().extend(interface_trace(problem_->disc(), du));
}

FluidState SensitivitySolver::linearized(const VelocityData& dg, const FEFunction& du) const {
  const Discretization& disc = problem_->disc();
  Vector rhs = Vector::Zero(fluid_size(disc));
  if (!du.coefficients.isZero(0.0))
    rhs = linear_.shape_rhs(transform_derivatives(disc, base_->fields, extend(du)));
  return linear_.solve(rhs, {dg, {}});
}

FluidState SensitivitySolver::linearized_wrt_g(const VelocityData& dg) const {
  return linearized(dg, FEFunction::zero(problem_->disc().displacement()));
}

FluidState SensitivitySolver::linearized_wrt_u(const FEFunction& du) const { return linearized({}, du); }

TractionTrace SensitivitySolver::traction_derivative(const FEFunction& dp, const FEFunction& dphi) const {
  const Discretization& disc = problem_->disc();
  const FESpace& v = disc.velocity();
  TractionTrace t = TractionTrace::zero(disc);
  for (std::size_t k = 0; k < t.edges.size(); ++k) {
    const auto& edge = disc.tagged_edges()[t.edges[k]];
    const int e = fluid_element_index(disc, edge.triangle);
    for (int m = 0; m < 3; ++m) {
      const auto [xi, eta] = edge_node_ref(edge, m);
      const double p_hat = sample_scalar(disc.pressure(), base_->fluid.p.coefficients, e, xi, eta);
      const double d_p = sample_scalar(disc.pressure(), dp.coefficients, e, xi, eta);
      const Mat2 grad = sample_vector(disc, v, base_->map.displacement.coefficients, e, xi, eta).gradient;
      const Mat2 dgrad = sample_vector(disc, v, dphi.coefficients, e, xi, eta).gradient;
      Vec2 val = d_p * (cofactor(Mat2::Identity() + grad) * edge.normal) + p_hat * (cofactor(dgrad) * edge.normal);
      if (mode_ == TractionMode::normal_projected) val = val.dot(edge.normal) * edge.normal;
      t.values[k][m] = val;
    }
  }
  return t;
}

FEFunction SensitivitySolver::coupling_map(const FEFunction& du) const {
  const Discretization& disc = problem_->disc();
  const FEFunction dphi = extend(du);
  const FluidState fl = linearized({}, du);
  return problem_->elasticity().solve(traction_load(disc, traction_derivative(fl.p, dphi)));
}

SensitivityState SensitivitySolver::solve(const VelocityData& dg, const SensitivityOptions& opts) const {
  const Discretization& disc = problem_->disc();
  SensitivityState st;
  st.du = FEFunction::zero(disc.displacement());
  int rising = 0;
  for (int k = 1; k <= opts.max_iter; ++k) {
    const FEFunction dphi = extend(st.du);
    const FluidState fl = linearized(dg, st.du);
    const FEFunction next = problem_->elasticity().solve(traction_load(disc, traction_derivative(fl.p, dphi)));
    FEFunction diff = next;
    diff.coefficients -= st.du.coefficients;
    const double nn = disc.h1_norm(next);
    const double inc = disc.h1_norm(diff);
    const double rel = nn > 0.0 ? inc / nn : inc;
    auto& rep = st.report;
    if (!rep.increments.empty() && rep.increments.back() > 0.0) {
      rep.increment_ratios.push_back(rel / rep.increments.back());
      rising = rep.increment_ratios.back() >= 1.0 ? rising + 1 : 0;
    }
    rep.increments.push_back(rel);
    rep.iterations = k;
    st.du = next;
    if (rel <= opts.tol) {
      rep.converged = true;
      break;
    }
    if (rising >= 3 || !std::isfinite(rel))
      throw DivergenceError(
          "sensitivity fixed point does not contract (ratio >= 1): the coupling derivative is not small "
          "enough at this operating point; reduce the inflow magnitude or stiffen the solid",
          rep);
  }
  if (!st.report.converged)
    throw DivergenceError("sensitivity fixed point did not converge in " + std::to_string(opts.max_iter) +
                              " iterations",
                          st.report);
  st.dfluid = linearized(dg, st.du);
  return st;
}

SensitivityState SensitivitySolver::solve_monolithic(const VelocityData& dg) const {
  const Discretization& disc = problem_->disc();
  const int nf = fluid_size(disc);
  const int ns = disc.displacement().n_dofs();
  const double nu = problem_->nu();
  const auto& fields = base_->fields;
  std::vector<Eigen::Triplet<double>> t;
  auto add = [&t](const SparseMatrix& m, int r0, int c0) {
    for (int k = 0; k < m.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(m, k); it; ++it)
        t.emplace_back(static_cast<int>(it.row()) + r0, static_cast<int>(it.col()) + c0, it.value());
  };
  add(assemble_transformed_oseen(disc, fields, fields, &base_->fluid.w, &base_->fluid.w, nu).monolithic(), 0, 0);
  add(problem_->elasticity().matrix(), nf, nf);
  const SparseMatrix dr = assemble_shape_jacobian(disc, fields, base_->fluid, nu);
  const FEFunction zero_phi = FEFunction::zero(disc.velocity());
  for (int j : interface_solid_dofs(disc)) {
    FEFunction unit = FEFunction::zero(disc.displacement());
    unit.coefficients[j] = 1.0;
    const FEFunction phi = extend(unit);
    const Vector col_f = dr * phi.coefficients;
    const Vector col_s = -traction_load(disc, traction_derivative(FEFunction::zero(disc.pressure()), phi));
    for (int i = 0; i < nf; ++i)
      if (col_f[i] != 0.0) t.emplace_back(i, nf + j, col_f[i]);
    for (int i = 0; i < ns; ++i)
      if (col_s[i] != 0.0) t.emplace_back(nf + i, nf + j, col_s[i]);
  }
  // pressure dofs on elements that own interface edges
  std::vector<int> pdofs;
  for (int k : interface_edges(disc)) {
    const int e = fluid_element_index(disc, disc.tagged_edges()[k].triangle);
    for (int b = 0; b < 3; ++b) pdofs.push_back(disc.pressure().cell_nodes[e][b]);
  }
  std::sort(pdofs.begin(), pdofs.end());
  pdofs.erase(std::unique(pdofs.begin(), pdofs.end()), pdofs.end());
  for (int q : pdofs) {
    FEFunction unit = FEFunction::zero(disc.pressure());
    unit.coefficients[q] = 1.0;
    const Vector col = -traction_load(disc, traction_derivative(unit, zero_phi));
    for (int i = 0; i < ns; ++i)
      if (col[i] != 0.0) t.emplace_back(nf + i, pressure_offset(disc) + q, col[i]);
  }
  SparseMatrix big(nf + ns, nf + ns);
  big.setFromTriplets(t.begin(), t.end());
  std::vector<int> constrained = fluid_dirichlet_dofs(disc);
  for (int d : problem_->elasticity().clamped()) constrained.push_back(nf + d);
  Vector values = Vector::Zero(nf + ns);
  values.head(nf) = fluid_dirichlet_values(disc, {dg, {}});
  const ConstrainedSolver solver(big, constrained);
  const Vector x = solver.solve(Vector::Zero(nf + ns), values);
  SensitivityState st;
  st.dfluid = FluidState::from_monolithic(disc, x.head(nf));
  st.du = {spaces::displacement, x.tail(ns)};
  st.report.iterations = 1;
  st.report.converged = true;
  return st;
}

Eigen::MatrixXd SensitivitySolver::coupling_matrix() const {
  const Discretization& disc = problem_->disc();
  const int ns = disc.displacement().n_dofs();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(ns, ns);
  for (int j : interface_solid_dofs(disc)) {
    FEFunction unit = FEFunction::zero(disc.displacement());
    unit.coefficients[j] = 1.0;
    m.col(j) = coupling_map(unit).coefficients;
  }
  return m;
}

SolverReport SensitivitySolver::t_iteration_report(const VelocityData& dg, const PicardOptions& opts) const {
  return linear_.iterate(Vector::Zero(fluid_size(problem_->disc())), {dg, {}}, opts).second;
}

std::pair<FluidState, FluidState> SensitivitySolver::t_iteration_vs_direct(const VelocityData& dg,
                                                                           const PicardOptions& opts,
                                                                           SolverReport* report) const {
  const Vector rhs = Vector::Zero(fluid_size(problem_->disc()));
  auto [it, rep] = linear_.iterate(rhs, {dg, {}}, opts);
  if (report) *report = rep;
  return {it, linear_.solve(rhs, {dg, {}})};
}

// ---------------------------------------------------------------------------------------------

int TaylorReport::valid_rows() const {
  return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const TaylorRow& r) { return r.valid; }));
}

bool TaylorReport::passed(double min_slope) const {
  return valid_rows() >= 3 && slope_u >= min_slope && slope_w >= min_slope && slope_p >= min_slope;
}

namespace {
VelocityData shifted(const VelocityData& g, double h, const VelocityData& dg) {
  return [g, h, dg](const Point& x) {
    Vec2 v = g ? g(x) : Vec2::Zero();
    if (dg) v += h * dg(x);
    return v;
  };
}
}  // namespace

TaylorReport taylor_test(const FSIProblem& problem, const VelocityData& g, const VelocityData& dg,
                         const std::vector<double>& hs, const CouplingOptions& opts,
                         const SensitivityOptions& sopts) {
  const Discretization& disc = problem.disc();
  const FSIState base = problem.solve(g, opts);
  const SensitivitySolver sens(problem, base, opts.traction);
  const SensitivityState d = sens.solve(dg, sopts);
  TaylorReport rep;
  rep.derivative_norm_u = disc.h1_norm(d.du);
  rep.derivative_norm_w = disc.h1_norm(d.dfluid.w);
  rep.derivative_norm_p = disc.l2_norm(d.dfluid.p);
  std::vector<double> vh, ru, rw, rp;
  for (double h : hs) {
    TaylorRow row;
    row.h = h;
    try {
      const FSIState s = problem.solve(shifted(g, h, dg), opts, &base);
      row.r_u = disc.h1_norm(add_scaled(add_scaled(s.u, -1.0, base.u), -h, d.du));
      row.r_w = disc.h1_norm(add_scaled(add_scaled(s.fluid.w, -1.0, base.fluid.w), -h, d.dfluid.w));
      row.r_p = disc.l2_norm(add_scaled(add_scaled(s.fluid.p, -1.0, base.fluid.p), -h, d.dfluid.p));
      row.valid = std::isfinite(row.r_u) && std::isfinite(row.r_w) && std::isfinite(row.r_p);
    } catch (const std::runtime_error&) {
      row.valid = false;
    }
    if (row.valid) {
      vh.push_back(h);
      ru.push_back(row.r_u);
      rw.push_back(row.r_w);
      rp.push_back(row.r_p);
    }
    rep.rows.push_back(row);
  }
  if (vh.size() >= 3) {
    rep.slope_u = loglog_slope(vh, ru);
    rep.slope_w = loglog_slope(vh, rw);
    rep.slope_p = loglog_slope(vh, rp);
  }
  return rep;
}

FluidTaylorReport fluid_taylor_inflow(const FSIProblem& problem, const FSIState& base, const VelocityData& g,
                                      const VelocityData& dg, const std::vector<double>& hs,
                                      const CouplingOptions& opts) {
  const Discretization& disc = problem.disc();
  const SensitivitySolver sens(problem, base, opts.traction);
  const Vector d = sens.linearized_wrt_g(dg).monolithic();
  const Vector x0 = base.fluid.monolithic();
  FluidTaylorReport rep;
  for (double h : hs) {
    const auto [fl, r] = problem.fluid().solve(base.fields, {shifted(g, h, dg), {}}, {}, opts.fluid, &base.fluid);
    rep.h.push_back(h);
    rep.r.push_back(product_norm(disc, fl.monolithic() - x0 - h * d));
  }
  rep.slope = loglog_slope(rep.h, rep.r);
  return rep;
}

FluidTaylorReport fluid_taylor_displacement(const FSIProblem& problem, const FSIState& base,
                                            const VelocityData& g, const FEFunction& du,
                                            const std::vector<double>& hs, const CouplingOptions& opts) {
  const Discretization& disc = problem.disc();
  const SensitivitySolver sens(problem, base, opts.traction);
  const Vector d = sens.linearized_wrt_u(du).monolithic();
  const Vector x0 = base.fluid.monolithic();
  FluidTaylorReport rep;
  for (double h : hs) {
    const FSIState s = problem.evaluate(add_scaled(base.u, h, du), g, opts, &base.fluid);
    rep.h.push_back(h);
    rep.r.push_back(product_norm(disc, s.fluid.monolithic() - x0 - h * d));
  }
  rep.slope = loglog_slope(rep.h, rep.r);
  return rep;
}

// ---------------------------------------------------------------------------------------------

FEFunction random_interface_displacement(const Discretization& disc, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  FEFunction u = FEFunction::zero(disc.displacement());
  for (int j : interface_solid_dofs(disc)) u.coefficients[j] = scale * dist(rng);
  return u;
}

double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  const Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

ProbeResult contraction_probe(const SensitivitySolver& solver, const VelocityData& dg, int n_samples,
                              std::uint64_t seed, int power_steps) {
  const Discretization& disc = solver.problem().disc();
  ProbeResult res;
  res.samples = n_samples;
  for (int s = 0; s < n_samples; ++s) {
    FEFunction x = random_interface_displacement(disc, seed + static_cast<std::uint64_t>(s), 1.0);
    x.coefficients /= disc.h1_norm(x);
    std::vector<double> ratios;
    for (int k = 0; k < power_steps; ++k) {
      FEFunction y = solver.coupling_map(x);
      const double ny = disc.h1_norm(y);
      ratios.push_back(ny);
      if (ny == 0.0) break;
      y.coefficients /= ny;
      x = std::move(y);
    }
    // geometric mean over the second half damps oscillation between complex eigenvalue pairs
    const std::size_t start = ratios.size() / 2;
    double log_sum = 0.0;
    bool zero = false;
    for (std::size_t k = start; k < ratios.size(); ++k) {
      if (ratios[k] == 0.0) zero = true;
      else log_sum += std::log(ratios[k]);
    }
    const double eta = zero ? 0.0 : std::exp(log_sum / static_cast<double>(ratios.size() - start));
    if (s == 0 || eta > res.eta_power) {
      res.eta_power = eta;
      res.power_ratios = ratios;
    }
  }
  const SolverReport t = solver.t_iteration_report(dg, PicardOptions{1e-12, 200});
  res.t_iteration_converged = t.converged;
  res.eta_t_iteration = t.increment_ratios.empty() ? 0.0 : t.max_ratio();
  return res;
}

void write_taylor_csv(std::ostream& os, const TaylorReport& r) {
  os << "h,R_u,R_w,R_p\n" << std::setprecision(17);
  for (const auto& row : r.rows)
    if (row.valid) os << row.h << ',' << row.r_u << ',' << row.r_w << ',' << row.r_p << '\n';
}

}  // namespace fsisens
