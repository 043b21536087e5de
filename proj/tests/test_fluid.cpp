#include <doctest.h>

#include "fsisens/fluid.hpp"
#include "oracles.hpp"

using namespace fsisens;

namespace {

const Discretization& coarse() {
  static const Discretization d(build_channel_mesh(ChannelGeometry::default_geometry(0.2)));
  return d;
}

const Discretization& straight() {
  static const Discretization d(build_channel_mesh(ChannelGeometry::straight_channel(4.0, 1.0, 0.2)));
  return d;
}

ExactSolution poiseuille(double m, double nu) {
  ExactSolution e;
  e.w = [m](const Point& x) { return InflowProfile{m, 1.0}(x); };
  e.grad_w = [m](const Point& x) {
    Mat2 g = Mat2::Zero();
    g(0, 1) = m * 4.0 * (1.0 - 2.0 * x.y);
    return g;
  };
  e.p = [m, nu](const Point& x) { return 8.0 * nu * m * (4.0 - x.x); };
  return e;
}

}  // namespace

TEST_CASE("zero data gives the zero state in one iteration") {
  const auto f = TransformFields::make_identity(coarse());
  const auto [s, rep] = solve_navier_stokes(coarse(), f, InflowProfile{0.0, 1.0}, {}, 1.0);
  CHECK(rep.iterations <= 1);
  CHECK(s.w.coefficients.isZero(0.0));
  CHECK(s.p.coefficients.isZero(0.0));
}

TEST_CASE("Poiseuille flow is reproduced exactly") {
  const auto& d = straight();
  const auto f = TransformFields::make_identity(d);
  const auto [s, rep] = solve_navier_stokes(d, f, InflowProfile{0.3, 1.0}, {}, 1.3);
  CHECK(rep.iterations <= 3);
  const auto [ew, ep] = solution_errors(d, s, poiseuille(0.3, 1.3));
  CHECK(ew < 1e-9);
  CHECK(ep < 1e-9);
  CHECK(outflow_functional(d, nullptr, s, 1.3) < 1e-9);
}

TEST_CASE("Picard solution agrees with an independent Newton solve") {
  const auto& d = coarse();
  const auto f = TransformFields::make_identity(d);
  const InflowProfile g{0.1, 1.0};
  const auto [s, rep] = solve_navier_stokes(d, f, g, {}, 1.0);
  CHECK(rep.converged);
  const auto ref = oracle::newton_navier_stokes(d, inflow_data(g), 1.0);
  CHECK(product_norm(d, s.monolithic() - ref.monolithic()) <= 1e-8 * product_norm(d, ref.monolithic()));
  CHECK(rep.max_ratio() <= 0.9);
  CHECK(rep.residual_history.back() < 1e-8);
}

TEST_CASE("Picard contraction grows with the inflow magnitude and the flow is mirror symmetric") {
  const auto& d = coarse();
  const auto f = TransformFields::make_identity(d);
  const FluidSolver solver(d, 1.0);
  double prev = 0.0;
  for (double m : {0.05, 0.1, 0.2, 0.4}) {
    const auto [s, rep] = solver.solve(f, inflow_data({m, 1.0}), {}, {});
    REQUIRE(rep.increment_ratios.size() >= 1);
    CHECK(rep.increment_ratios.front() > prev);
    prev = rep.increment_ratios.front();
    const auto map = mirror_scalar_map(d.velocity(), 1.0);
    const Vector mw = mirror_vector_field(d.velocity(), map, s.w.coefficients);
    CHECK((mw - s.w.coefficients).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("closed channel without outflow reports the pressure null space") {
  Mesh m = build_channel_mesh(ChannelGeometry::straight_channel(2.0, 1.0, 0.25));
  for (auto& e : m.boundary_edges)
    if (e.tag == BoundaryTag::outflow) e.tag = BoundaryTag::wall;
  const Discretization d(m);
  CHECK_THROWS_WITH_AS(FluidSolver(d, 1.0), doctest::Contains("null space"), SolverError);
}

TEST_CASE("tangled coefficient fields are rejected during assembly") {
  auto f = TransformFields::make_identity(coarse());
  f.identity = false;
  f.J[f.index(3, 0)] = -0.5;
  CHECK_THROWS_AS(assemble_transformed_oseen(coarse(), f, f, nullptr, nullptr, 1.0), MeshTanglingError);
}

TEST_CASE("linearized solver: trivial cases and the rest state") {
  const auto& d = coarse();
  const auto f = TransformFields::make_identity(d);
  const auto zero = FluidState::zero(d);
  const auto [z, rz] = solve_linearized(d, f, nullptr, zero, {}, {}, 1.0, LinearizedMode::direct);
  CHECK(z.monolithic().isZero(0.0));
  const InflowProfile dg{1.0, 1.0};
  const auto [lin, r] = solve_linearized(d, f, nullptr, zero, {}, inflow_data(dg), 1.0, LinearizedMode::direct);
  auto stokes = assemble_stokes(d, 1.0);
  const auto fixed = fluid_dirichlet_dofs(d);
  const Vector vals = fluid_dirichlet_values(d, inflow_data(dg));
  std::vector<Constraint> cs;
  for (int i : fixed) cs.push_back({i, vals[i]});
  const Vector ref = solve_sparse(apply_dirichlet(stokes, cs));
  CHECK((lin.monolithic() - ref).cwiseAbs().maxCoeff() <= 1e-12 * ref.cwiseAbs().maxCoeff());
}

TEST_CASE("linearized solve is the derivative of the nonlinear solve") {
  const auto& d = coarse();
  const auto f = TransformFields::make_identity(d);
  const FluidSolver solver(d, 1.0);
  const InflowProfile g{0.2, 1.0};
  const auto base = solver.solve(f, inflow_data(g), {}, {1e-13, 80}).first;
  const LinearizedSolver lin(d, f, base, 1.0);
  const VelocityData dg = [](const Point& x) { return Vec2(std::sin(M_PI * x.y), 0.0); };
  const Vector dx = lin.solve(Vector::Zero(fluid_size(d)), {dg, {}}).monolithic();
  std::vector<double> hs{1e-2, 1e-3, 1e-4}, diff, rem;
  for (double h : hs) {
    const VelocityData gh = [&, h](const Point& x) { return Vec2(g(x) + h * dg(x)); };
    const Vector xh = solver.solve(f, {gh, {}}, {}, {1e-13, 80}).first.monolithic();
    diff.push_back(product_norm(d, (xh - base.monolithic()) / h - dx));
    rem.push_back(product_norm(d, xh - base.monolithic() - h * dx));
  }
  CHECK(loglog_slope(hs, diff) >= 0.9);
  CHECK(loglog_slope(hs, rem) >= 1.8);
}

TEST_CASE("constant-coefficient iteration agrees with the direct linearized solve") {
  const auto& d = coarse();
  auto eta = zero_interface_trace(d);
  for (auto& v : eta.values) v = Vec2(0.004, -0.003);
  const auto f = transform_fields(d, flow_map_from_extension(harmonic_extension(d, eta)));
  const FluidSolver solver(d, 1.0);
  const auto base = solver.solve(f, inflow_data({0.05, 1.0}), {}, {1e-13, 80}).first;
  const LinearizedSolver lin(d, f, base, 1.0);
  const Vector rhs = Vector::Zero(fluid_size(d));
  const DirichletData bc = inflow_data({1.0, 1.0});
  const auto direct = lin.solve(rhs, bc);
  const auto [it, rep] = lin.iterate(rhs, bc, {1e-13, 200});
  REQUIRE(rep.converged);
  CHECK(rep.max_ratio() < 1.0);
  CHECK(product_norm(d, it.monolithic() - direct.monolithic()) <= 1e-8 * product_norm(d, direct.monolithic()));
}

TEST_CASE("manufactured solutions: exact reproduction and fitted rates") {
  const auto poly = mms_convergence_study(polynomial_solution(1.0), 2, 0.5, 1.0);
  for (const auto& l : poly.levels) {
    CHECK(l.error_w_h1 <= 1e-10);
    CHECK(l.error_p_l2 <= 1e-10);
  }
  const auto trig = mms_convergence_study(trigonometric_solution(1.0), 3, 0.25, 1.0);
  std::vector<double> h, ew, ep;
  for (const auto& l : trig.levels) {
    h.push_back(l.h);
    ew.push_back(l.error_w_h1);
    ep.push_back(l.error_p_l2);
  }
  CHECK(std::abs(trig.rate_w_fit - oracle::fit_slope(h, ew)) < 0.01);
  CHECK(std::abs(trig.rate_p_fit - oracle::fit_slope(h, ep)) < 0.01);
  CHECK(trig.rate_w_last > 1.5);
}

TEST_CASE("log-log slope of an exact power law") {
  const std::vector<double> h{0.1, 0.05, 0.025}, e{3e-2, 7.5e-3, 1.875e-3};
  CHECK(loglog_slope(h, e) == doctest::Approx(2.0).epsilon(1e-12));
}
