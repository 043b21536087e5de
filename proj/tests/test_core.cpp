#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fsisens/forms.hpp"
#include "fsisens/geomap.hpp"
#include "fsisens/mesh.hpp"

using namespace fsisens;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

const Discretization& coarse_disc() {
  static const Discretization d(build_channel_mesh(ChannelGeometry::default_geometry(0.2)));
  return d;
}

Vec2 smooth_field(const Point& x) {
  return {0.3 * std::sin(1.3 * x.x + 0.4) * std::cos(2.1 * x.y), 0.2 * std::cos(0.7 * x.x) * x.y * x.y};
}

}  // namespace

TEST_CASE("quadrature rules integrate monomials exactly") {
  const auto& r = triangle_rule();
  for (int a = 0; a <= 6; ++a)
    for (int b = 0; a + b <= 6; ++b) {
      double s = 0.0;
      for (std::size_t q = 0; q < r.size(); ++q)
        s += r.weights[q] * std::pow(r.points[q][0], a) * std::pow(r.points[q][1], b);
      const double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
      CHECK(0.5 * s == doctest::Approx(exact).epsilon(1e-13));
    }
  const auto& e = edge_rule();
  for (int a = 0; a <= 7; ++a) {
    double s = 0.0;
    for (std::size_t q = 0; q < e.size(); ++q) s += e.weights[q] * std::pow(e.points[q][0], a);
    CHECK(s == doctest::Approx(1.0 / (a + 1)).epsilon(1e-13));
  }
}

TEST_CASE("P2 basis is a partition of unity with nodal interpolation") {
  const std::array<std::array<double, 2>, 6> nodes{{{0, 0}, {1, 0}, {0, 1}, {0.5, 0}, {0.5, 0.5}, {0, 0.5}}};
  for (int i = 0; i < 6; ++i) {
    const auto v = basis::p2_values(nodes[i][0], nodes[i][1]);
    for (int j = 0; j < 6; ++j) CHECK(v[j] == doctest::Approx(i == j ? 1.0 : 0.0));
  }
  const auto g = basis::p2_gradients(0.2, 0.3);
  Vec2 sum = Vec2::Zero();
  for (const auto& gi : g) sum += gi;
  CHECK(sum.norm() < 1e-14);
}

TEST_CASE("default channel mesh has the expected measures and topology") {
  const Mesh m = build_channel_mesh(ChannelGeometry::default_geometry(0.2));
  CHECK(m.area(Subdomain::fluid) == doctest::Approx(4.0 - 0.16).epsilon(1e-13));
  CHECK(m.area(Subdomain::solid) == doctest::Approx(0.16 - 0.04).epsilon(1e-13));
  CHECK(m.tagged_length(BoundaryTag::inflow) == doctest::Approx(1.0));
  CHECK(m.tagged_length(BoundaryTag::outflow) == doctest::Approx(1.0));
  CHECK(m.tagged_length(BoundaryTag::wall) == doctest::Approx(8.0));
  CHECK(m.tagged_length(BoundaryTag::interface) == doctest::Approx(1.6));
  CHECK(m.tagged_length(BoundaryTag::clamped) == doctest::Approx(0.8));
  const auto rep = validate_mesh(m);
  CHECK(rep.ok());
  CHECK(rep.boundary_loops == 2);
  CHECK(rep.euler_characteristic + static_cast<long>(rep.boundary_loops) == 2);
  CHECK(m.max_edge_length() <= 0.2 * std::sqrt(2.0) + 1e-12);
  CHECK(mirror_permutation(m).has_value());
}

TEST_CASE("mesh text round trip and refinement") {
  const Mesh m = build_channel_mesh(ChannelGeometry::default_geometry(0.2));
  std::stringstream ss;
  write_mesh(ss, m);
  const Mesh r = read_mesh(ss);
  CHECK(r.nodes.size() == m.nodes.size());
  CHECK(r.triangles.size() == m.triangles.size());
  CHECK(r.boundary_edges.size() == m.boundary_edges.size());
  const Mesh f = refine_uniform(m);
  CHECK(f.triangles.size() == 4 * m.triangles.size());
  CHECK(validate_mesh(f).ok());
  CHECK(f.area(Subdomain::fluid) == doctest::Approx(m.area(Subdomain::fluid)).epsilon(1e-13));
}

TEST_CASE("invalid geometries are rejected with a rule") {
  auto g = ChannelGeometry::default_geometry(0.08);
  g.obstacle_outer = axis_aligned_square({1.2, 0.5}, 1.2);
  CHECK_THROWS_AS(g.validate(), GeometryError);
  auto h = ChannelGeometry::default_geometry(-1.0);
  CHECK_THROWS_AS(h.validate(), GeometryError);
}

TEST_CASE("mass and stiffness matrices reproduce area and annihilate constants") {
  const auto& d = coarse_disc();
  const auto& M = d.mass(spaces::fluid_scalar);
  const auto& K = d.stiffness(spaces::fluid_scalar);
  const Vector one = Vector::Ones(M.rows());
  CHECK(one.dot(M * one) == doctest::Approx(3.84).epsilon(1e-12));
  CHECK((K * one).cwiseAbs().maxCoeff() < 1e-11);
  const auto& Mp = d.mass(spaces::pressure);
  const Vector onep = Vector::Ones(Mp.rows());
  CHECK(onep.dot(Mp * onep) == doctest::Approx(3.84).epsilon(1e-12));
}

TEST_CASE("H1 norm of an interpolated quadratic is exact") {
  const auto& d = coarse_disc();
  // w = (x y, y^2): |w|^2 and |grad w|^2 integrated over the fluid region with a polynomial oracle
  const auto w = interpolate(d, spaces::velocity, [](const Point& x) { return Vec2(x.x * x.y, x.y * x.y); });
  auto integrate_rect = [](double x0, double x1, double y0, double y1) {
    // integral of x^2 y^2 + y^4 + (y^2 + x^2) + 4 y^2
    auto X = [](double a, int p) { return std::pow(a, p + 1) / (p + 1); };
    auto I = [&](int px, int py) { return (X(x1, px) - X(x0, px)) * (X(y1, py) - X(y0, py)); };
    return I(2, 2) + I(0, 4) + I(0, 2) + I(2, 0) + 4 * I(0, 2);
  };
  const double exact = integrate_rect(0, 4, 0, 1) - integrate_rect(1.0, 1.4, 0.3, 0.7);
  CHECK(d.h1_norm(w) == doctest::Approx(std::sqrt(exact)).epsilon(1e-11));
}

TEST_CASE("transform derivative agrees with central differences") {
  Mat2 g;
  g << 0.1, -0.05, 0.07, 0.12;
  Mat2 dg;
  dg << 0.3, 0.2, -0.4, 0.1;
  const auto base = transform_at(g);
  CHECK(base.K == cofactor(Mat2::Identity() + g));
  CHECK((base.A - base.A.transpose()).norm() < 1e-15);
  const auto der = transform_derivative_at(base, dg);
  const double eps = 1e-6;
  const auto p = transform_at(g + eps * dg), m = transform_at(g - eps * dg);
  CHECK(std::abs((p.J - m.J) / (2 * eps) - der.dJ) < 1e-9);
  CHECK(((p.K - m.K) / (2 * eps) - der.dK).norm() < 1e-9);
  CHECK(((p.A - m.A) / (2 * eps) - der.dA).norm() < 1e-8);
}

TEST_CASE("identity map gives exact identity fields") {
  const auto& d = coarse_disc();
  const auto f = transform_fields(d, flow_map_from_extension(FEFunction::zero(d.velocity())));
  CHECK(f.identity);
  for (std::size_t k = 0; k < f.J.size(); ++k) {
    REQUIRE(f.J[k] == 1.0);
    REQUIRE(f.A[k] == Mat2::Identity());
    REQUIRE(f.K[k] == Mat2::Identity());
  }
}

TEST_CASE("harmonic extension matches the interface data and the Piola identity holds") {
  const auto& d = coarse_disc();
  auto eta = zero_interface_trace(d);
  const auto& pts = d.topology().points;
  for (std::size_t k = 0; k < eta.nodes.size(); ++k) {
    const Point& x = pts[eta.nodes[k]];
    eta.values[k] = Vec2(0.02 * (x.y - 0.5), -0.01 * (x.x - 1.2));
  }
  const auto phi = harmonic_extension(d, eta);
  const auto& v = d.velocity();
  for (std::size_t k = 0; k < eta.nodes.size(); ++k) {
    const int i = v.scalar_of_global[eta.nodes[k]];
    CHECK(phi.coefficients[v.dof(i, 0)] == eta.values[k][0]);
    CHECK(phi.coefficients[v.dof(i, 1)] == eta.values[k][1]);
  }
  for (int i : boundary_dofs(d, spaces::velocity, BoundaryTag::wall)) CHECK(phi.coefficients[i] == 0.0);
  const auto map = flow_map_from_extension(phi);
  const auto f = transform_fields(d, map);
  CHECK(f.min_J > 0.9);
  CHECK(max_cofactor_divergence(d, map) < 1e-12);
}

TEST_CASE("identity-coefficient Oseen assembly equals plain Stokes without advection") {
  const auto& d = coarse_disc();
  const auto id = TransformFields::make_identity(d);
  const auto a = assemble_transformed_oseen(d, id, id, nullptr, nullptr, 0.7).monolithic();
  const auto b = assemble_stokes(d, 0.7).monolithic();
  CHECK(SparseMatrix(a - b).norm() < 1e-12 * b.norm());
}

TEST_CASE("matrix assembly is consistent with the nonlinear action") {
  const auto& d = coarse_disc();
  const auto w = interpolate(d, spaces::velocity, smooth_field);
  FEFunction p = FEFunction::zero(d.pressure());
  for (int i = 0; i < p.coefficients.size(); ++i) p.coefficients[i] = std::sin(0.37 * i);
  auto eta = zero_interface_trace(d);
  for (auto& val : eta.values) val = Vec2(0.01, -0.015);
  const auto f = transform_fields(d, flow_map_from_extension(harmonic_extension(d, eta)));
  const auto sys = assemble_transformed_oseen(d, f, f, &w, nullptr, 1.3);
  Vector x(fluid_size(d));
  x << w.coefficients, p.coefficients;
  const Vector lhs = sys.monolithic() * x;
  const Vector act = navier_stokes_action(d, f, w, p, 1.3);
  CHECK((lhs - act).norm() < 1e-12 * act.norm());
  // the Picard splitting: Stokes(I) x - picard_rhs = action
  const Vector split = assemble_stokes(d, 1.3).monolithic() * x - picard_rhs(d, f, w, p, 1.3);
  CHECK((split - act).norm() < 1e-11 * act.norm());
}

TEST_CASE("shape derivative and linearized operator agree with finite differences") {
  const auto& d = coarse_disc();
  const double nu = 0.9;
  const auto w = interpolate(d, spaces::velocity, smooth_field);
  FEFunction p = FEFunction::zero(d.pressure());
  for (int i = 0; i < p.coefficients.size(); ++i) p.coefficients[i] = std::cos(0.21 * i);
  auto eta = zero_interface_trace(d);
  const auto& pts = d.topology().points;
  for (std::size_t k = 0; k < eta.nodes.size(); ++k)
    eta.values[k] = Vec2(0.01 * pts[eta.nodes[k]].y, 0.02 * pts[eta.nodes[k]].x);
  const auto phi0 = harmonic_extension(d, eta);
  const auto dphi = interpolate(d, spaces::velocity, [](const Point& x) { return Vec2(0.05 * x.y, -0.03 * x.x * x.y); });
  const auto f0 = transform_fields(d, flow_map_from_extension(phi0));
  const auto der = transform_derivatives(d, f0, dphi);
  const Vector analytic = shape_derivative_action(d, f0, der, w, p, nu);
  const double eps = 1e-6;
  auto action_at = [&](double s) {
    FEFunction phi = phi0;
    phi.coefficients += s * dphi.coefficients;
    return navier_stokes_action(d, transform_fields(d, flow_map_from_extension(phi)), w, p, nu);
  };
  const Vector fd = (action_at(eps) - action_at(-eps)) / (2 * eps);
  CHECK((fd - analytic).norm() < 1e-7 * analytic.norm());

  // Oseen operator with reaction is the derivative of the action in (w, p)
  const auto dw = interpolate(d, spaces::velocity, [](const Point& x) { return Vec2(x.y * x.y, 0.5 * x.x); });
  FEFunction dp = FEFunction::zero(d.pressure());
  dp.coefficients.setConstant(0.3);
  Vector dx(fluid_size(d));
  dx << dw.coefficients, dp.coefficients;
  const Vector lin = assemble_transformed_oseen(d, f0, f0, &w, &w, nu).monolithic() * dx;
  auto act_w = [&](double s) {
    FEFunction ws = w, ps = p;
    ws.coefficients += s * dw.coefficients;
    ps.coefficients += s * dp.coefficients;
    return navier_stokes_action(d, f0, ws, ps, nu);
  };
  const Vector fdw = (act_w(eps) - act_w(-eps)) / (2 * eps);
  CHECK((fdw - lin).norm() < 1e-7 * lin.norm());

  // the perturbation splitting of the linearized operator
  const Vector split = assemble_oseen_identity(d, w, nu).monolithic() * dx -
                       oseen_perturbation_rhs(d, f0, w, dw, dp, nu);
  CHECK((split - lin).norm() < 1e-11 * lin.norm());
}

TEST_CASE("elasticity stiffness is symmetric with rigid motions in its kernel") {
  const auto& d = coarse_disc();
  const auto K = assemble_elasticity(d, Lame{});
  CHECK(SparseMatrix(K - SparseMatrix(K.transpose())).norm() < 1e-12 * K.norm());
  for (auto rigid : {std::function<Vec2(const Point&)>([](const Point&) { return Vec2(1, 0); }),
                     std::function<Vec2(const Point&)>([](const Point&) { return Vec2(0, 1); }),
                     std::function<Vec2(const Point&)>([](const Point& x) { return Vec2(-x.y, x.x); })}) {
    const auto u = interpolate(d, spaces::displacement, rigid);
    CHECK((K * u.coefficients).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("assembly is independent of the thread count") {
  const auto& d = coarse_disc();
  const auto w = interpolate(d, spaces::velocity, smooth_field);
  const auto id = TransformFields::make_identity(d);
  set_num_threads(1);
  const SparseMatrix a = assemble_transformed_oseen(d, id, id, &w, &w, 1.0).monolithic();
  set_num_threads(3);
  const SparseMatrix b = assemble_transformed_oseen(d, id, id, &w, &w, 1.0).monolithic();
  set_num_threads(1);
  CHECK(SparseMatrix(a - b).norm() == 0.0);
}
