#include "fsisens/elasticity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fsisens {

std::string_view to_string(TractionMode m) {
  return m == TractionMode::full_vector ? "full-vector" : "normal-projected";
}

TractionMode parse_traction_mode(std::string_view s) {
  if (s == "full-vector") return TractionMode::full_vector;
  if (s == "normal-projected") return TractionMode::normal_projected;
  throw std::invalid_argument("unknown traction interpretation '" + std::string(s) + "'");
}

std::vector<int> interface_edges(const Discretization& disc) {
  std::vector<int> out;
  const auto& edges = disc.tagged_edges();
  for (int i = 0; i < static_cast<int>(edges.size()); ++i)
    if (edges[i].tag == BoundaryTag::interface) out.push_back(i);
  return out;
}

TractionTrace TractionTrace::zero(const Discretization& disc) {
  TractionTrace t;
  t.edges = interface_edges(disc);
  t.values.assign(t.edges.size(), {Vec2::Zero(), Vec2::Zero(), Vec2::Zero()});
  return t;
}

double TractionTrace::max_abs() const {
  double m = 0.0;
  for (const auto& e : values)
    for (const auto& v : e) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

Vector traction_load(const Discretization& disc, const TractionTrace& t) {
  const FESpace& s = disc.displacement();
  Vector load = Vector::Zero(s.n_dofs());
  const auto& er = edge_rule();
  for (std::size_t k = 0; k < t.edges.size(); ++k) {
    const auto& edge = disc.tagged_edges()[t.edges[k]];
    const std::array<int, 3> nodes{edge.a, edge.mid, edge.b};
    std::array<int, 3> idx;
    for (int m = 0; m < 3; ++m) {
      idx[m] = s.scalar_of_global[nodes[m]];
      if (idx[m] < 0) throw DofError("interface node without a solid dof");
    }
    for (std::size_t q = 0; q < er.size(); ++q) {
      const double x = er.points[q][0];
      const double w = edge.length * er.weights[q];
      const std::array<double, 3> L{(1 - x) * (1 - 2 * x), 4 * x * (1 - x), x * (2 * x - 1)};
      Vec2 tq = Vec2::Zero();
      for (int m = 0; m < 3; ++m) tq += L[m] * t.values[k][m];
      for (int m = 0; m < 3; ++m)
        for (int c = 0; c < 2; ++c) load[s.dof(idx[m], c)] += w * L[m] * tq[c];
    }
  }
  return load;
}

Vector volume_load(const Discretization& disc, const std::function<Vec2(const Point&)>& f1) {
  const FESpace& s = disc.displacement();
  if (!f1) return Vector::Zero(s.n_dofs());
  const auto& rule = triangle_rule();
  return assemble_vector(s.n_dofs(), static_cast<int>(s.elements.size()), [&](int e, LocalVector& lv) {
    lv.rows.resize(12);
    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < 6; ++a) lv.rows[c * 6 + a] = s.dof(s.cell_nodes[e][a], c);
    lv.values = Eigen::VectorXd::Zero(12);
    const auto& g = disc.geometry(s.elements[e]);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto [xi, eta] = rule.points[q];
      const double w = g.area * rule.weights[q];
      const Vec2 f = f1(g.map(xi, eta));
      const auto N = basis::p2_values(xi, eta);
      for (int a = 0; a < 6; ++a)
        for (int c = 0; c < 2; ++c) lv.values[c * 6 + a] += w * f[c] * N[a];
    }
  });
}

ElasticitySolver::ElasticitySolver(const Discretization& disc, const Lame& lame)
    : disc_(&disc), lame_(lame) {
  if (!(lame.mu > 0.0) || !(lame.lambda >= 0.0))
    throw std::invalid_argument("Lame parameters require mu > 0 and lambda >= 0");
  if (!disc.has_solid()) throw DofError("mesh has no solid subdomain");
  k_ = assemble_elasticity(disc, lame);
  solver_ = ConstrainedSolver(k_, boundary_dofs(disc, spaces::displacement, BoundaryTag::clamped));
}

FEFunction ElasticitySolver::solve(const Vector& load) const {
  const FESpace& s = disc_->displacement();
  if (load.size() != s.n_dofs()) throw DofError("load vector size does not match the solid space");
  return {s.descriptor, solver_.solve(load, Vector::Zero(load.size()))};
}

FEFunction ElasticitySolver::solve(const std::function<Vec2(const Point&)>& f1, const TractionTrace& t) const {
  return solve(volume_load(*disc_, f1) + traction_load(*disc_, t));
}

double ElasticitySolver::residual(const FEFunction& u, const Vector& load) const {
  Vector r = k_ * u.coefficients - load;
  for (int d : solver_.constrained()) r[d] = u.coefficients[d];
  return r.norm();
}

FEFunction solve_elasticity(const Discretization& disc, const std::function<Vec2(const Point&)>& f1,
                            const TractionTrace& t, const Lame& lame) {
  return ElasticitySolver(disc, lame).solve(f1, t);
}

}  // namespace fsisens
