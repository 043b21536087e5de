#include <doctest.h>

#include <sstream>

#include "fsisens/fsi.hpp"
#include "oracles.hpp"

using namespace fsisens;

namespace {

const Discretization& disc() {
  static const Discretization d(build_channel_mesh(ChannelGeometry::default_geometry(0.2)));
  return d;
}

const FSIProblem& problem() {
  static const FSIProblem p(disc(), 1.0, Lame{});
  return p;
}

CouplingOptions tight() {
  CouplingOptions o;
  o.tol = 1e-11;
  o.fluid.tol = 1e-13;
  return o;
}

}  // namespace

TEST_CASE("traction: zero pressure, constant pressure and a pointwise oracle") {
  const auto& d = disc();
  const auto id_map = flow_map_from_extension(FEFunction::zero(d.velocity()));
  CHECK(traction(d, id_map, FEFunction::zero(d.pressure())).max_abs() == 0.0);
  FEFunction c = FEFunction::zero(d.pressure());
  c.coefficients.setConstant(2.5);
  const auto tc = traction(d, id_map, c);
  for (std::size_t k = 0; k < tc.edges.size(); ++k)
    for (int m = 0; m < 3; ++m)
      CHECK((tc.values[k][m] - 2.5 * d.tagged_edges()[tc.edges[k]].normal).norm() < 1e-15);

  auto eta = zero_interface_trace(d);
  const auto& pts = d.topology().points;
  for (std::size_t k = 0; k < eta.nodes.size(); ++k)
    eta.values[k] = Vec2(0.01 * std::sin(3 * pts[eta.nodes[k]].y), 0.02 * pts[eta.nodes[k]].x);
  const auto map = flow_map_from_extension(harmonic_extension(d, eta));
  FEFunction p = FEFunction::zero(d.pressure());
  for (int i = 0; i < p.coefficients.size(); ++i) p.coefficients[i] = std::cos(0.3 * i);
  const auto t = traction(d, map, p);
  double worst = 0.0;
  for (std::size_t k = 0; k < t.edges.size(); ++k)
    for (int m = 0; m < 3; ++m) {
      const Vec2 ref = oracle::pointwise_traction(d, map.displacement, p, d.tagged_edges()[t.edges[k]], m);
      worst = std::max(worst, (ref - t.values[k][m]).norm());
    }
  CHECK(worst <= 1e-12);
}

TEST_CASE("zero inflow converges to the zero state in one outer iteration") {
  const auto s = problem().solve(InflowProfile{0.0, 1.0}, {});
  CHECK(s.log.size() == 1);
  CHECK(s.u.coefficients.isZero(0.0));
  CHECK(s.fluid.w.coefficients.isZero(0.0));
  CHECK(fsi_residual(problem(), s, InflowProfile{0.0, 1.0}) == 0.0);
}

TEST_CASE("small inflow: geometric convergence, symmetry, residual and fixed point") {
  const auto& d = disc();
  const InflowProfile g{0.05, 1.0};
  const auto opts = tight();
  const auto s = problem().solve(g, opts);
  REQUIRE(s.report.converged);
  for (std::size_t k = 2; k < s.log.size(); ++k) CHECK(s.log[k].ratio <= 0.5);
  const auto tr = interface_trace(d, s.u);
  double umax = 0.0;
  for (const auto& v : tr.values) umax = std::max(umax, v.norm());
  CHECK(umax > 0.0);
  const auto map = mirror_scalar_map(d.displacement(), 1.0);
  CHECK((mirror_vector_field(d.displacement(), map, s.u.coefficients) - s.u.coefficients).cwiseAbs().maxCoeff() <=
        1e-8 * std::max(1.0, umax));
  const double res = problem().residual(s, g, opts.traction);
  CHECK(res <= 1e-7);
  FEFunction nt = problem().structure_response(s, opts.traction);
  nt.coefficients -= s.u.coefficients;
  CHECK(d.h1_norm(nt) <= 10 * opts.tol * d.h1_norm(s.u));

  // perturbing the displacement raises the residual
  FSIState pert = problem().evaluate(s.u, g, opts, &s.fluid);
  const auto bump = interpolate(d, spaces::displacement, [](const Point& x) { return Vec2(1e-3 * x.y, 0.0); });
  pert.u.coefficients += bump.coefficients;
  for (int c : problem().elasticity().clamped()) pert.u.coefficients[c] = 0.0;
  pert = problem().evaluate(pert.u, g, opts, &s.fluid);
  CHECK(problem().residual(pert, g, opts.traction) >= res + 1e-5);

  std::ostringstream csv;
  write_fsi_log_csv(csv, s.log);
  CHECK(csv.str().rfind("iter,du,ratio,fluid_iterations,min_J,min_eig_A\n", 0) == 0);
}

TEST_CASE("relaxation does not change the fixed point") {
  const auto& d = disc();
  const InflowProfile g{0.05, 1.0};
  auto a = tight(), b = tight();
  b.omega = 0.5;
  const auto sa = problem().solve(g, a), sb = problem().solve(g, b);
  FEFunction diff = sa.u;
  diff.coefficients -= sb.u.coefficients;
  CHECK(d.h1_norm(diff) <= 1e-8 * std::max(1.0, d.h1_norm(sa.u)));
  CHECK(product_norm(d, sa.fluid.monolithic() - sb.fluid.monolithic()) <= 1e-8);
}

TEST_CASE("outer ratio grows with inflow and shrinks with stiffness") {
  double prev = 0.0;
  for (double m : {0.025, 0.05, 0.1}) {
    const auto s = problem().solve(InflowProfile{m, 1.0}, {});
    const double r = s.log.size() > 2 ? s.log[2].ratio : 0.0;
    CHECK(r > prev);
    prev = r;
  }
  prev = 1e300;
  for (double mu : {25.0, 50.0, 100.0}) {
    const FSIProblem p(disc(), 1.0, Lame{1.5 * mu, mu});
    const auto s = p.solve(InflowProfile{0.05, 1.0}, {});
    const double r = s.log.size() > 2 ? s.log[2].ratio : 0.0;
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("control-to-state map is Lipschitz along a sweep") {
  const auto& d = disc();
  std::vector<FSIState> states;
  const std::vector<double> ms{0.04, 0.05, 0.06};
  for (double m : ms) states.push_back(problem().solve(InflowProfile{m, 1.0}, tight()));
  std::vector<double> c;
  for (std::size_t k = 1; k < states.size(); ++k) {
    FEFunction du = states[k].u;
    du.coefficients -= states[k - 1].u.coefficients;
    const double dw = product_norm(d, states[k].fluid.monolithic() - states[k - 1].fluid.monolithic());
    c.push_back((d.h1_norm(du) + dw) / (ms[k] - ms[k - 1]));
  }
  CHECK(std::isfinite(c[0]));
  CHECK(c[1] / c[0] == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("invalid coupling options are rejected") {
  CouplingOptions o;
  o.omega = 1.5;
  CHECK_THROWS_WITH_AS(o.validate(), doctest::Contains("omega"), std::invalid_argument);
  o.omega = 1.0;
  o.tol = 0.0;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
}

TEST_CASE("excessive inflow tangles the mesh and aborts with the iterate") {
  try {
    CouplingOptions o;
    o.max_outer_iter = 50;
    problem().solve(InflowProfile{60.0, 1.0}, o);
    FAIL("expected failure");
  } catch (const FSIError& e) {
    CHECK(e.last_u().coefficients.size() == disc().displacement().n_dofs());
  }
}
