#include <doctest.h>

#include <random>

#include "fsisens/elasticity.hpp"

using namespace fsisens;

namespace {

const Discretization& disc() {
  static const Discretization d(build_channel_mesh(ChannelGeometry::default_geometry(0.2)));
  return d;
}

TractionTrace random_traction(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto t = TractionTrace::zero(disc());
  for (auto& e : t.values)
    for (auto& v : e) v = Vec2(u(rng), u(rng));
  // shared endpoints must agree for a continuous trace; averaging is not needed for the load
  return t;
}

}  // namespace

TEST_CASE("zero data gives zero displacement") {
  const ElasticitySolver s(disc(), Lame{});
  const auto u = s.solve({}, TractionTrace::zero(disc()));
  CHECK(u.coefficients.isZero(0.0));
}

TEST_CASE("solution is linear in the data") {
  const ElasticitySolver s(disc(), Lame{});
  const auto t = random_traction(3);
  auto f1 = [](const Point& x) { return Vec2(std::sin(x.x), x.y); };
  const auto u1 = s.solve(f1, t);
  auto t2 = t;
  for (auto& e : t2.values)
    for (auto& v : e) v *= 2.5;
  const auto u2 = s.solve([&](const Point& x) { return Vec2(2.5 * f1(x)); }, t2);
  CHECK((u2.coefficients - 2.5 * u1.coefficients).norm() <= 1e-12 * u2.coefficients.norm());
}

TEST_CASE("uniform normal traction matches a dense solve") {
  const Lame lame{1.0, 1.0};
  auto t = TractionTrace::zero(disc());
  for (std::size_t k = 0; k < t.edges.size(); ++k) {
    const Vec2 n_solid = -disc().tagged_edges()[t.edges[k]].normal;
    t.values[k] = {1e-3 * n_solid, 1e-3 * n_solid, 1e-3 * n_solid};
  }
  const auto u = solve_elasticity(disc(), {}, t, lame);
  Eigen::MatrixXd K = Eigen::MatrixXd(assemble_elasticity(disc(), lame));
  Vector b = traction_load(disc(), t);
  for (int d : boundary_dofs(disc(), spaces::displacement, BoundaryTag::clamped)) {
    K.row(d).setZero();
    K(d, d) = 1.0;
    b[d] = 0.0;
  }
  const Vector dense = K.partialPivLu().solve(b);
  CHECK((u.coefficients - dense).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(u.coefficients.norm() > 0.0);
}

TEST_CASE("interface trace equals pointwise evaluation") {
  const auto& d = disc();
  const auto u = interpolate(d, spaces::displacement,
                             [](const Point& x) { return Vec2(x.x * x.y, std::cos(x.x) - x.y * x.y); });
  const auto tr = interface_trace(d, u);
  CHECK(interface_trace(d, FEFunction::zero(d.displacement())).values[0] == Vec2::Zero());
  const FESpace& s = d.displacement();
  const std::array<std::array<double, 2>, 6> ref{{{0, 0}, {1, 0}, {0, 1}, {0.5, 0}, {0.5, 0.5}, {0, 0.5}}};
  for (std::size_t k = 0; k < tr.nodes.size(); ++k) {
    const int i = s.scalar_of_global[tr.nodes[k]];
    bool found = false;
    for (int e = 0; e < static_cast<int>(s.elements.size()) && !found; ++e)
      for (int a = 0; a < 6 && !found; ++a)
        if (s.cell_nodes[e][a] == i) {
          const auto smp = sample_vector(d, s, u.coefficients, e, ref[a][0], ref[a][1]);
          CHECK((smp.value - tr.values[k]).norm() < 1e-14);
          found = true;
        }
    CHECK(found);
  }
}

TEST_CASE("clamped operator is positive definite and reciprocal") {
  const auto& d = disc();
  const ElasticitySolver s(d, Lame{});
  const auto& K = s.matrix();
  std::vector<char> clamped(K.rows(), 0);
  for (int c : s.clamped()) clamped[c] = 1;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  double min_rq = 1e300;
  for (int k = 0; k < 50; ++k) {
    Vector x(K.rows());
    for (int i = 0; i < x.size(); ++i) x[i] = clamped[i] ? 0.0 : nd(rng);
    min_rq = std::min(min_rq, x.dot(K * x) / x.squaredNorm());
  }
  CHECK(min_rq > 0.0);
  const auto t1 = random_traction(5), t2 = random_traction(6);
  const double a = traction_load(d, t1).dot(s.solve({}, t2).coefficients);
  const double b = traction_load(d, t2).dot(s.solve({}, t1).coefficients);
  CHECK(std::abs(a - b) <= 1e-11 * std::max(std::abs(a), 1e-300) + 1e-18);
}

TEST_CASE("invalid Lame parameters are rejected") {
  CHECK_THROWS_AS(ElasticitySolver(disc(), Lame{1.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(ElasticitySolver(disc(), Lame{-1.0, 1.0}), std::invalid_argument);
  CHECK(parse_traction_mode("normal-projected") == TractionMode::normal_projected);
  CHECK_THROWS(parse_traction_mode("sideways"));
}
