#include "fsisens/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fsisens {

DirichletData inflow_data(const InflowProfile& g) { return {g, {}}; }

FluidState FluidState::zero(const Discretization& disc) {
  return {FEFunction::zero(disc.velocity()), FEFunction::zero(disc.pressure())};
}

FluidState FluidState::from_monolithic(const Discretization& disc, const Vector& x) {
  const int nv = disc.velocity().n_dofs();
  return {{spaces::velocity, x.head(nv)}, {spaces::pressure, x.tail(x.size() - nv)}};
}

Vector FluidState::monolithic() const {
  Vector x(w.coefficients.size() + p.coefficients.size());
  x << w.coefficients, p.coefficients;
  return x;
}

double SolverReport::max_ratio() const {
  double m = 0.0;
  for (double r : increment_ratios) m = std::max(m, r);
  return m;
}

std::vector<int> fluid_dirichlet_dofs(const Discretization& disc) {
  std::vector<int> d;
  for (auto tag : {BoundaryTag::inflow, BoundaryTag::wall, BoundaryTag::interface}) {
    if (!disc.has_tag(tag)) continue;
    const auto b = boundary_dofs(disc, spaces::velocity, tag);
    d.insert(d.end(), b.begin(), b.end());
  }
  std::sort(d.begin(), d.end());
  d.erase(std::unique(d.begin(), d.end()), d.end());
  return d;
}

Vector fluid_dirichlet_values(const Discretization& disc, const DirichletData& data) {
  const FESpace& v = disc.velocity();
  Vector x = Vector::Zero(fluid_size(disc));
  // ascending priority, so later tags overwrite shared corner nodes
  std::vector<BoundaryTag> order{BoundaryTag::interface, BoundaryTag::inflow, BoundaryTag::wall};
  std::sort(order.begin(), order.end(),
            [](BoundaryTag a, BoundaryTag b) { return dirichlet_priority(a) < dirichlet_priority(b); });
  for (auto tag : order) {
    if (!disc.has_tag(tag)) continue;
    const VelocityData* f = tag == BoundaryTag::inflow ? &data.inflow
                            : tag == BoundaryTag::wall ? &data.wall
                                                       : nullptr;
    for (int d : boundary_dofs(disc, spaces::velocity, tag)) {
      if (d >= v.n_scalar()) continue;  // handle both components through the scalar index
      const Vec2 val = (f && *f) ? (*f)(v.points[d]) : Vec2::Zero();
      x[v.dof(d, 0)] = val[0];
      x[v.dof(d, 1)] = val[1];
    }
  }
  return x;
}

double product_norm(const Discretization& disc, const Vector& x) {
  const auto s = FluidState::from_monolithic(disc, x);
  const double a = disc.h1_norm(s.w), b = disc.l2_norm(s.p);
  return std::sqrt(a * a + b * b);
}

namespace {

void require_pressure_fixed(const Discretization& disc) {
  if (!disc.has_tag(BoundaryTag::outflow))
    throw SolverError("constant-pressure null space: no natural outflow boundary and no pinned pressure dof");
}

}  // namespace

FluidSolver::FluidSolver(const Discretization& disc, double nu)
    : disc_(&disc), nu_(nu), dirichlet_(fluid_dirichlet_dofs(disc)) {
  if (!(nu > 0.0)) throw std::invalid_argument("viscosity must be positive");
  require_pressure_fixed(disc);
  stokes_ = ConstrainedSolver(assemble_stokes(disc, nu).monolithic(), dirichlet_);
}

std::pair<FluidState, SolverReport> FluidSolver::solve(const TransformFields& fields, const DirichletData& bc,
                                                       const FluidData& data, const PicardOptions& opts,
                                                       const FluidState* warm_start) const {
  const Discretization& disc = *disc_;
  const Vector load = assemble_rhs(disc, data);
  const Vector values = fluid_dirichlet_values(disc, bc);
  // the lagged terms start from the warm state or from zero, not from a lifted boundary field
  FluidState state = warm_start ? *warm_start : FluidState::zero(disc);
  Vector x = state.monolithic();
  SolverReport rep;
  for (int k = 0; k < opts.max_iter; ++k) {
    const Vector rhs = load + picard_rhs(disc, fields, state.w, state.p, nu_);
    const Vector next = stokes_.solve(rhs, values);
    if (!next.allFinite()) throw DivergenceError("Picard iterate is not finite", rep);
    const double nn = product_norm(disc, next);
    const double inc = product_norm(disc, next - x);
    const double rel = nn > 0.0 ? inc / nn : inc;
    x = next;
    state = FluidState::from_monolithic(disc, x);
    rep.iterations = k + 1;
    if (!rep.increments.empty() && rep.increments.back() > 0.0)
      rep.increment_ratios.push_back(rel / rep.increments.back());
    rep.increments.push_back(rel);
    rep.residual_history.push_back(residual(fields, state, bc, data));
    if (rel <= opts.tol) {
      rep.converged = true;
      return {state, rep};
    }
  }
  throw DivergenceError("Picard iteration did not converge in " + std::to_string(opts.max_iter) +
                            " iterations (last ratio " +
                            std::to_string(rep.increment_ratios.empty() ? 0.0 : rep.increment_ratios.back()) +
                            ")",
                        rep);
}

double FluidSolver::residual(const TransformFields& fields, const FluidState& state, const DirichletData& bc,
                             const FluidData& data) const {
  Vector r = navier_stokes_action(*disc_, fields, state.w, state.p, nu_) - assemble_rhs(*disc_, data);
  const Vector values = fluid_dirichlet_values(*disc_, bc);
  const Vector x = state.monolithic();
  for (int d : dirichlet_) r[d] = x[d] - values[d];
  return r.norm();
}

std::pair<FluidState, SolverReport> solve_navier_stokes(const Discretization& disc, const TransformFields& fields,
                                                        const InflowProfile& g, const FluidData& data, double nu,
                                                        const PicardOptions& opts) {
  return FluidSolver(disc, nu).solve(fields, inflow_data(g), data, opts);
}

double outflow_functional(const Discretization& disc, const FlowMap* map, const FluidState& state, double nu) {
  const FESpace& v = disc.velocity();
  const FESpace& ps = disc.pressure();
  const auto& er = edge_rule();
  Vector r = Vector::Zero(v.n_dofs());
  const std::array<std::array<double, 2>, 3> corner{{{0, 0}, {1, 0}, {0, 1}}};
  for (const auto& edge : disc.tagged_edges()) {
    if (edge.tag != BoundaryTag::outflow) continue;
    const auto& elems = v.elements;
    const int e = static_cast<int>(std::lower_bound(elems.begin(), elems.end(), edge.triangle) - elems.begin());
    const int k0 = edge.local_edge, k1 = (edge.local_edge + 1) % 3;
    const std::array<int, 3> nodes{edge.a, edge.mid, edge.b};
    for (std::size_t q = 0; q < er.size(); ++q) {
      const double t = er.points[q][0];
      const double w = edge.length * er.weights[q];
      const double xi = corner[k0][0] + t * (corner[k1][0] - corner[k0][0]);
      const double eta = corner[k0][1] + t * (corner[k1][1] - corner[k0][1]);
      const auto smp = sample_vector(disc, v, state.w.coefficients, e, xi, eta);
      const double p = sample_scalar(ps, state.p.coefficients, e, xi, eta);
      Mat2 A = Mat2::Identity(), K = Mat2::Identity();
      if (map) {
        const auto t_at = transform_at(sample_vector(disc, v, map->displacement.coefficients, e, xi, eta).gradient);
        A = t_at.A;
        K = t_at.K;
      }
      const Vec2 flux = nu * smp.gradient * A * edge.normal - p * K * edge.normal;
      const std::array<double, 3> L{(1 - t) * (1 - 2 * t), 4 * t * (1 - t), t * (2 * t - 1)};
      for (int m = 0; m < 3; ++m) {
        const int i = v.scalar_of_global[nodes[m]];
        for (int c = 0; c < 2; ++c) r[v.dof(i, c)] += w * L[m] * flux[c];
      }
    }
  }
  return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

// ---------------------------------------------------------------------------------------------

LinearizedSolver::LinearizedSolver(const Discretization& disc, const TransformFields& fields, FluidState base,
                                   double nu)
    : disc_(&disc), fields_(&fields), base_(std::move(base)), nu_(nu), dirichlet_(fluid_dirichlet_dofs(disc)) {
  require_pressure_fixed(disc);
  direct_ = ConstrainedSolver(assemble_transformed_oseen(disc, fields, fields, &base_.w, &base_.w, nu).monolithic(),
                              dirichlet_);
}

FluidState LinearizedSolver::solve(const Vector& rhs, const DirichletData& bc) const {
  return FluidState::from_monolithic(*disc_, direct_.solve(rhs, fluid_dirichlet_values(*disc_, bc)));
}

std::pair<FluidState, SolverReport> LinearizedSolver::iterate(const Vector& rhs, const DirichletData& bc,
                                                              const PicardOptions& opts) const {
  if (!identity_.ready())
    identity_ = ConstrainedSolver(assemble_oseen_identity(*disc_, base_.w, nu_).monolithic(), dirichlet_);
  const Vector values = fluid_dirichlet_values(*disc_, bc);
  const SparseMatrix& full = direct_.matrix();
  FluidState z = FluidState::zero(*disc_);
  Vector x = z.monolithic();
  SolverReport rep;
  for (int k = 0; k < opts.max_iter; ++k) {
    const Vector next =
        identity_.solve(rhs + oseen_perturbation_rhs(*disc_, *fields_, base_.w, z.w, z.p, nu_), values);
    const double nn = product_norm(*disc_, next);
    const double inc = product_norm(*disc_, next - x);
    const double rel = nn > 0.0 ? inc / nn : inc;
    x = next;
    z = FluidState::from_monolithic(*disc_, x);
    rep.iterations = k + 1;
    if (!rep.increments.empty() && rep.increments.back() > 0.0)
      rep.increment_ratios.push_back(rel / rep.increments.back());
    rep.increments.push_back(rel);
    Vector r = full * x - rhs;
    for (int d : dirichlet_) r[d] = x[d] - values[d];
    rep.residual_history.push_back(r.norm());
    if (!std::isfinite(rel)) break;
    if (rel <= opts.tol) {
      rep.converged = true;
      break;
    }
  }
  return {z, rep};
}

Vector LinearizedSolver::shape_rhs(const TransformDerivatives& d) const {
  return -shape_derivative_action(*disc_, *fields_, d, base_.w, base_.p, nu_);
}

std::pair<FluidState, SolverReport> solve_linearized(const Discretization& disc, const TransformFields& fields,
                                                     const TransformDerivatives* derivs, const FluidState& base,
                                                     const FluidData& data, const DirichletData& bc, double nu,
                                                     LinearizedMode mode, const PicardOptions& opts) {
  const LinearizedSolver solver(disc, fields, base, nu);
  Vector rhs = assemble_rhs(disc, data);
  if (derivs) rhs += solver.shape_rhs(*derivs);
  if (mode == LinearizedMode::t_iteration) return solver.iterate(rhs, bc, opts);
  SolverReport rep;
  rep.iterations = 1;
  rep.converged = true;
  return {solver.solve(rhs, bc), rep};
}

// ---------------------------------------------------------------------------------------------

ExactSolution trigonometric_solution(double nu) {
  using std::cos, std::sin;
  constexpr double pi = std::numbers::pi;
  ExactSolution s;
  s.w = [](const Point& x) { return Vec2(sin(pi * x.x) * sin(pi * x.y), cos(pi * x.x) * cos(pi * x.y)); };
  s.grad_w = [](const Point& x) {
    Mat2 g;
    g << pi * cos(pi * x.x) * sin(pi * x.y), pi * sin(pi * x.x) * cos(pi * x.y),
        -pi * sin(pi * x.x) * cos(pi * x.y), -pi * cos(pi * x.x) * sin(pi * x.y);
    return g;
  };
  s.p = [](const Point& x) { return sin(pi * x.x) * cos(pi * x.y); };
  s.data.f = [nu, w = s.w, gw = s.grad_w](const Point& x) {
    const Vec2 lap = -2.0 * pi * pi * w(x);
    const Vec2 grad_p(pi * cos(pi * x.x) * cos(pi * x.y), -pi * sin(pi * x.x) * sin(pi * x.y));
    return Vec2(-nu * lap + gw(x) * w(x) + grad_p);
  };
  s.data.f3 = [nu, gw = s.grad_w, p = s.p](const Point& x) {
    const Vec2 n(1.0, 0.0);
    return Vec2(nu * gw(x) * n - p(x) * n);
  };
  return s;
}

ExactSolution polynomial_solution(double nu) {
  ExactSolution s;
  s.w = [](const Point& x) { return Vec2(x.y * x.y, x.x * x.x); };
  s.grad_w = [](const Point& x) {
    Mat2 g;
    g << 0.0, 2 * x.y, 2 * x.x, 0.0;
    return g;
  };
  s.p = [](const Point& x) { return x.x + x.y; };
  s.data.f = [nu, w = s.w, gw = s.grad_w](const Point& x) {
    const Vec2 lap(2.0, 2.0);
    return Vec2(-nu * lap + gw(x) * w(x) + Vec2(1.0, 1.0));
  };
  s.data.f3 = [nu, gw = s.grad_w, p = s.p](const Point& x) {
    const Vec2 n(1.0, 0.0);
    return Vec2(nu * gw(x) * n - p(x) * n);
  };
  return s;
}

std::pair<double, double> solution_errors(const Discretization& disc, const FluidState& state,
                                          const ExactSolution& exact) {
  const FESpace& v = disc.velocity();
  const auto& rule = triangle_rule();
  double ew = 0.0, ep = 0.0;
  for (int e = 0; e < static_cast<int>(v.elements.size()); ++e) {
    const auto& g = disc.geometry(v.elements[e]);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto [xi, eta] = rule.points[q];
      const double w = g.area * rule.weights[q];
      const Point x = g.map(xi, eta);
      const auto s = sample_vector(disc, v, state.w.coefficients, e, xi, eta);
      const double ph = sample_scalar(disc.pressure(), state.p.coefficients, e, xi, eta);
      ew += w * ((s.value - exact.w(x)).squaredNorm() + (s.gradient - exact.grad_w(x)).squaredNorm());
      ep += w * (ph - exact.p(x)) * (ph - exact.p(x));
    }
  }
  return {std::sqrt(ew), std::sqrt(ep)};
}

double loglog_slope(const std::vector<double>& h, const std::vector<double>& err) {
  const std::size_t n = std::min(h.size(), err.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

MMSResult mms_convergence_study(const ExactSolution& exact, int levels, double h0, double nu) {
  MMSResult res;
  Mesh mesh = build_channel_mesh(ChannelGeometry::straight_channel(1.0, 1.0, h0));
  double h = h0;
  std::vector<double> hs, ew, ep;
  for (int l = 0; l < levels; ++l) {
    if (l > 0) {
      mesh = refine_uniform(mesh);
      h *= 0.5;
    }
    const Discretization disc(mesh);
    const FluidSolver solver(disc, nu);
    const auto fields = TransformFields::make_identity(disc);
    // 1e-12 sits on the roundoff floor of the finest levels; 1e-10 is far below the discretization error
    const auto [state, rep] = solver.solve(fields, {exact.w, exact.w}, exact.data, PicardOptions{1e-10, 100});
    const auto [a, b] = solution_errors(disc, state, exact);
    res.levels.push_back({h, fluid_size(disc), a, b, rep.iterations});
    hs.push_back(h);
    ew.push_back(a);
    ep.push_back(b);
  }
  if (levels >= 2) {
    res.rate_w_fit = loglog_slope(hs, ew);
    res.rate_p_fit = loglog_slope(hs, ep);
    const std::size_t n = hs.size();
    res.rate_w_last = std::log(ew[n - 2] / ew[n - 1]) / std::log(hs[n - 2] / hs[n - 1]);
    res.rate_p_last = std::log(ep[n - 2] / ep[n - 1]) / std::log(hs[n - 2] / hs[n - 1]);
  }
  return res;
}

}  // namespace fsisens
