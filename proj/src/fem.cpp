#include "fsisens/fem.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

namespace fsisens {

const QuadratureRule& triangle_rule() {
  static const QuadratureRule rule = [] {
    QuadratureRule r;
    auto orbit3 = [&r](double a, double w) {
      const double b = 1.0 - 2.0 * a;
      // barycentric (b, a, a) and permutations; reference coordinates are (l1, l2)
      r.points.push_back({a, a});
      r.points.push_back({b, a});
      r.points.push_back({a, b});
      for (int i = 0; i < 3; ++i) r.weights.push_back(w);
    };
    auto orbit6 = [&r](double a, double b, double w) {
      const double c = 1.0 - a - b;
      const std::array<std::array<double, 2>, 6> pts = {
          {{a, b}, {b, a}, {a, c}, {c, a}, {b, c}, {c, b}}};
      for (const auto& p : pts) {
        r.points.push_back(p);
        r.weights.push_back(w);
      }
    };
    orbit3(0.249286745170910421, 0.116786275726379366);
    orbit3(0.063089014491502228, 0.050844906370206817);
    orbit6(0.053145049844816947, 0.310352451033784405, 0.082851075618373575);
    return r;
  }();
  return rule;
}

const QuadratureRule& edge_rule() {
  static const QuadratureRule rule = [] {
    QuadratureRule r;
    const double x[4] = {-0.861136311594052575, -0.339981043584856265, 0.339981043584856265,
                         0.861136311594052575};
    const double w[4] = {0.347854845137453857, 0.652145154862546143, 0.652145154862546143,
                         0.347854845137453857};
    for (int i = 0; i < 4; ++i) {
      r.points.push_back({0.5 * (1.0 + x[i]), 0.0});
      r.weights.push_back(0.5 * w[i]);
    }
    return r;
  }();
  return rule;
}

namespace basis {

std::array<double, 6> p2_values(double xi, double eta) {
  const double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
  return {l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
          4 * l0 * l1,       4 * l1 * l2,       4 * l2 * l0};
}

std::array<Vec2, 6> p2_gradients(double xi, double eta) {
  const double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
  const Vec2 g0(-1, -1), g1(1, 0), g2(0, 1);
  return {(4 * l0 - 1) * g0,        (4 * l1 - 1) * g1,        (4 * l2 - 1) * g2,
          4 * (l1 * g0 + l0 * g1),  4 * (l2 * g1 + l1 * g2),  4 * (l0 * g2 + l2 * g0)};
}

const std::array<Mat2, 6>& p2_hessians() {
  static const std::array<Mat2, 6> h = [] {
    const Vec2 g0(-1, -1), g1(1, 0), g2(0, 1);
    auto outer = [](const Vec2& a, const Vec2& b) -> Mat2 { return a * b.transpose(); };
    return std::array<Mat2, 6>{4 * outer(g0, g0),
                               4 * outer(g1, g1),
                               4 * outer(g2, g2),
                               4 * (outer(g0, g1) + outer(g1, g0)),
                               4 * (outer(g1, g2) + outer(g2, g1)),
                               4 * (outer(g2, g0) + outer(g0, g2))};
  }();
  return h;
}

std::array<double, 3> p1_values(double xi, double eta) { return {1.0 - xi - eta, xi, eta}; }

const std::array<Vec2, 3>& p1_gradients() {
  static const std::array<Vec2, 3> g = {Vec2(-1, -1), Vec2(1, 0), Vec2(0, 1)};
  return g;
}

}  // namespace basis

P2Topology::P2Topology(const Mesh& mesh) {
  n_vertices = static_cast<int>(mesh.nodes.size());
  points = mesh.nodes;
  vertex_edges_.resize(mesh.nodes.size());
  triangle_edges.resize(mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& v = mesh.triangles[t].v;
    for (int k = 0; k < 3; ++k) {
      const int a = v[k], b = v[(k + 1) % 3];
      int id = -1;
      for (const auto& [other, e] : vertex_edges_[std::min(a, b)])
        if (other == std::max(a, b)) id = e;
      if (id < 0) {
        id = static_cast<int>(edges.size());
        edges.push_back({std::min(a, b), std::max(a, b)});
        vertex_edges_[std::min(a, b)].push_back({std::max(a, b), id});
        const Point& pa = mesh.nodes[a];
        const Point& pb = mesh.nodes[b];
        points.push_back({0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)});
      }
      triangle_edges[t][k] = id;
    }
  }
}

std::array<int, 6> P2Topology::triangle_nodes(const Mesh& mesh, int t) const {
  const auto& v = mesh.triangles[t].v;
  const auto& e = triangle_edges[t];
  return {v[0], v[1], v[2], n_vertices + e[0], n_vertices + e[1], n_vertices + e[2]};
}

int P2Topology::edge_midpoint(int a, int b) const {
  for (const auto& [other, e] : vertex_edges_[std::min(a, b)])
    if (other == std::max(a, b)) return n_vertices + e;
  throw MeshError("edge not present in topology");
}

namespace {

FESpace make_space(const Mesh& mesh, const P2Topology& topo, SpaceDescriptor d) {
  FESpace s;
  s.descriptor = d;
  s.scalar_of_global.assign(topo.n_nodes(), -1);
  const int npc = d.order == 2 ? 6 : 3;
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    if (mesh.triangles[t].domain != d.subdomain) continue;
    s.elements.push_back(t);
    const auto nodes = topo.triangle_nodes(mesh, t);
    std::array<int, 6> local{-1, -1, -1, -1, -1, -1};
    for (int k = 0; k < npc; ++k) {
      int& idx = s.scalar_of_global[nodes[k]];
      if (idx < 0) {
        idx = static_cast<int>(s.global_node.size());
        s.global_node.push_back(nodes[k]);
        s.points.push_back(topo.points[nodes[k]]);
      }
      local[k] = idx;
    }
    s.cell_nodes.push_back(local);
  }
  return s;
}

int space_index(const SpaceDescriptor& d) {
  if (d == spaces::velocity) return 0;
  if (d == spaces::pressure) return 1;
  if (d == spaces::displacement) return 2;
  if (d == spaces::fluid_scalar) return 3;
  if (d == spaces::solid_scalar) return 4;
  if (d == SpaceDescriptor{1, Arity::scalar, Subdomain::solid}) return 5;
  throw DofError("unsupported space descriptor");
}

}  // namespace

Discretization::Discretization(Mesh mesh) : mesh_(std::move(mesh)), topology_(mesh_) {
  spaces_.push_back(make_space(mesh_, topology_, spaces::velocity));
  spaces_.push_back(make_space(mesh_, topology_, spaces::pressure));
  spaces_.push_back(make_space(mesh_, topology_, spaces::displacement));
  spaces_.push_back(make_space(mesh_, topology_, spaces::fluid_scalar));
  spaces_.push_back(make_space(mesh_, topology_, spaces::solid_scalar));
  spaces_.push_back(make_space(mesh_, topology_, SpaceDescriptor{1, Arity::scalar, Subdomain::solid}));

  geometry_.reserve(mesh_.triangles.size());
  for (const auto& t : mesh_.triangles) {
    const Point& a = mesh_.nodes[t.v[0]];
    const Point& b = mesh_.nodes[t.v[1]];
    const Point& c = mesh_.nodes[t.v[2]];
    ElementGeometry g;
    g.origin = a;
    g.jacobian << b.x - a.x, c.x - a.x, b.y - a.y, c.y - a.y;
    g.inv_jacobian_t = g.jacobian.inverse().transpose();
    g.area = 0.5 * g.jacobian.determinant();
    if (!(g.area > 0.0)) throw MeshError("degenerate or inverted triangle in discretization");
    geometry_.push_back(g);
  }

  // owning triangle of each tagged edge
  std::map<std::pair<int, int>, std::pair<int, int>> half;  // directed edge -> (triangle, k)
  for (int t = 0; t < static_cast<int>(mesh_.triangles.size()); ++t)
    for (int k = 0; k < 3; ++k)
      half[{mesh_.triangles[t].v[k], mesh_.triangles[t].v[(k + 1) % 3]}] = {t, k};
  for (const auto& e : mesh_.boundary_edges) {
    TaggedEdge te;
    te.a = e.v[0];
    te.b = e.v[1];
    te.tag = e.tag;
    te.mid = topology_.edge_midpoint(e.v[0], e.v[1]);
    auto it = half.find({e.v[0], e.v[1]});
    if (it == half.end()) throw MeshError("tagged edge orientation does not match its owner");
    te.triangle = it->second.first;
    te.local_edge = it->second.second;
    const Point& pa = mesh_.nodes[te.a];
    const Point& pb = mesh_.nodes[te.b];
    te.length = std::hypot(pb.x - pa.x, pb.y - pa.y);
    te.normal = Vec2(pb.y - pa.y, -(pb.x - pa.x)) / te.length;
    tagged_edges_.push_back(te);
  }

  // norm matrices for the scalar spaces
  mass_.resize(spaces_.size());
  stiffness_.resize(spaces_.size());
  for (int si : {1, 3, 4, 5}) {
    const FESpace& s = spaces_[si];
    const int npc = s.nodes_per_cell();
    const auto& rule = triangle_rule();
    auto build = [&](bool stiff) {
      return assemble_matrix(s.n_scalar(), s.n_scalar(), static_cast<int>(s.elements.size()),
                             [&](int e, LocalMatrix& lm) {
                               const auto& g = geometry_[s.elements[e]];
                               lm.rows.assign(s.cell_nodes[e].begin(), s.cell_nodes[e].begin() + npc);
                               lm.cols = lm.rows;
                               lm.values = Eigen::MatrixXd::Zero(npc, npc);
                               for (std::size_t q = 0; q < rule.size(); ++q) {
                                 const auto [xi, eta] = rule.points[q];
                                 const double w = rule.weights[q] * g.area;
                                 if (npc == 6) {
                                   const auto v = basis::p2_values(xi, eta);
                                   const auto gr = p2_physical_gradients(g, xi, eta);
                                   for (int i = 0; i < 6; ++i)
                                     for (int j = 0; j < 6; ++j)
                                       lm.values(i, j) += w * (stiff ? gr[i].dot(gr[j]) : v[i] * v[j]);
                                 } else {
                                   const auto v = basis::p1_values(xi, eta);
                                   const auto gr = p1_physical_gradients(g);
                                   for (int i = 0; i < 3; ++i)
                                     for (int j = 0; j < 3; ++j)
                                       lm.values(i, j) += w * (stiff ? gr[i].dot(gr[j]) : v[i] * v[j]);
                                 }
                               }
                             });
    };
    mass_[si] = build(false);
    stiffness_[si] = build(true);
  }
}

const FESpace& Discretization::space(const SpaceDescriptor& d) const { return spaces_[space_index(d)]; }

bool Discretization::has_tag(BoundaryTag t) const {
  return std::any_of(tagged_edges_.begin(), tagged_edges_.end(),
                     [t](const TaggedEdge& e) { return e.tag == t; });
}

namespace {
int scalar_index_for(const SpaceDescriptor& d) {
  if (d.arity != Arity::scalar)
    return scalar_index_for(SpaceDescriptor{d.order, Arity::scalar, d.subdomain});
  return space_index(d);
}
}  // namespace

const SparseMatrix& Discretization::mass(const SpaceDescriptor& d) const { return mass_[scalar_index_for(d)]; }
const SparseMatrix& Discretization::stiffness(const SpaceDescriptor& d) const {
  return stiffness_[scalar_index_for(d)];
}

double Discretization::l2_norm(const FEFunction& f) const {
  const FESpace& s = space(f.space);
  const SparseMatrix& m = mass(f.space);
  double sum = 0.0;
  for (int c = 0; c < s.n_components(); ++c) {
    const auto x = f.coefficients.segment(c * s.n_scalar(), s.n_scalar());
    sum += x.dot(m * x);
  }
  return std::sqrt(std::max(sum, 0.0));
}

double Discretization::h1_norm(const FEFunction& f) const {
  const FESpace& s = space(f.space);
  const SparseMatrix& m = mass(f.space);
  const SparseMatrix& k = stiffness(f.space);
  double sum = 0.0;
  for (int c = 0; c < s.n_components(); ++c) {
    const auto x = f.coefficients.segment(c * s.n_scalar(), s.n_scalar());
    sum += x.dot(m * x) + x.dot(k * x);
  }
  return std::sqrt(std::max(sum, 0.0));
}

bool tag_adjacent(const SpaceDescriptor& space, BoundaryTag tag) {
  if (tag == BoundaryTag::interface) return true;
  if (space.subdomain == Subdomain::fluid)
    return tag == BoundaryTag::inflow || tag == BoundaryTag::wall || tag == BoundaryTag::outflow;
  return tag == BoundaryTag::clamped;
}

int dirichlet_priority(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::wall: return 3;
    case BoundaryTag::inflow: return 2;
    case BoundaryTag::interface: return 1;
    default: return 0;
  }
}

std::vector<int> boundary_dofs(const Discretization& disc, const SpaceDescriptor& d, BoundaryTag tag) {
  if (!tag_adjacent(d, tag))
    throw DofError(std::string("boundary tag '") + std::string(to_string(tag)) +
                   "' is not adjacent to the " + std::string(to_string(d.subdomain)) + " subdomain");
  const FESpace& s = disc.space(d);
  std::vector<int> scalars;
  for (const auto& e : disc.tagged_edges()) {
    if (e.tag != tag) continue;
    for (int node : {e.a, e.b, e.mid}) {
      if (d.order == 1 && node == e.mid) continue;
      const int i = s.scalar_of_global[node];
      if (i >= 0) scalars.push_back(i);
    }
  }
  std::sort(scalars.begin(), scalars.end());
  scalars.erase(std::unique(scalars.begin(), scalars.end()), scalars.end());
  std::vector<int> dofs;
  for (int c = 0; c < s.n_components(); ++c)
    for (int i : scalars) dofs.push_back(s.dof(i, c));
  return dofs;
}

FEFunction interpolate(const Discretization& disc, const SpaceDescriptor& d,
                       const std::function<Vec2(const Point&)>& f) {
  const FESpace& s = disc.space(d);
  FEFunction out = FEFunction::zero(s);
  for (int i = 0; i < s.n_scalar(); ++i) {
    const Vec2 v = f(s.points[i]);
    for (int c = 0; c < s.n_components(); ++c) out.coefficients[s.dof(i, c)] = v[c];
  }
  return out;
}

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int n) { g_threads = std::max(1, n); }
int num_threads() { return g_threads; }

void parallel_for(int n, const std::function<void(int)>& body) {
  const int nt = std::min(num_threads(), std::max(n, 1));
  if (nt <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (n + nt - 1) / nt;
  for (int t = 0; t < nt; ++t) {
    const int lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (int i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

SparseMatrix assemble_matrix(int n_rows, int n_cols, int n_elements,
                             const std::function<void(int, LocalMatrix&)>& local) {
  std::vector<LocalMatrix> buf(n_elements);
  parallel_for(n_elements, [&](int e) { local(e, buf[e]); });
  std::size_t nnz = 0;
  for (const auto& b : buf) nnz += b.rows.size() * b.cols.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(nnz);
  for (const auto& b : buf)
    for (std::size_t i = 0; i < b.rows.size(); ++i)
      for (std::size_t j = 0; j < b.cols.size(); ++j)
        trip.emplace_back(b.rows[i], b.cols[j], b.values(static_cast<Eigen::Index>(i),
                                                         static_cast<Eigen::Index>(j)));
  SparseMatrix m(n_rows, n_cols);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Vector assemble_vector(int n_rows, int n_elements, const std::function<void(int, LocalVector&)>& local) {
  std::vector<LocalVector> buf(n_elements);
  parallel_for(n_elements, [&](int e) { local(e, buf[e]); });
  Vector v = Vector::Zero(n_rows);
  for (const auto& b : buf)
    for (std::size_t i = 0; i < b.rows.size(); ++i) v[b.rows[i]] += b.values[static_cast<Eigen::Index>(i)];
  return v;
}

std::array<Vec2, 6> p2_physical_gradients(const ElementGeometry& g, double xi, double eta) {
  auto ref = basis::p2_gradients(xi, eta);
  for (auto& v : ref) v = g.inv_jacobian_t * v;
  return ref;
}

std::array<Vec2, 3> p1_physical_gradients(const ElementGeometry& g) {
  std::array<Vec2, 3> out;
  for (int i = 0; i < 3; ++i) out[i] = g.inv_jacobian_t * basis::p1_gradients()[i];
  return out;
}

VectorSample sample_vector(const Discretization& disc, const FESpace& space, const Vector& coeffs,
                           int e, double xi, double eta) {
  const auto& g = disc.geometry(space.elements[e]);
  const auto v = basis::p2_values(xi, eta);
  const auto gr = p2_physical_gradients(g, xi, eta);
  VectorSample s{Vec2::Zero(), Mat2::Zero()};
  for (int a = 0; a < 6; ++a) {
    const int i = space.cell_nodes[e][a];
    for (int c = 0; c < 2; ++c) {
      const double x = coeffs[space.dof(i, c)];
      s.value[c] += x * v[a];
      s.gradient.row(c) += x * gr[a].transpose();
    }
  }
  return s;
}

double sample_scalar(const FESpace& space, const Vector& coeffs, int e, double xi, double eta) {
  double s = 0.0;
  if (space.descriptor.order == 1) {
    const auto v = basis::p1_values(xi, eta);
    for (int a = 0; a < 3; ++a) s += coeffs[space.cell_nodes[e][a]] * v[a];
  } else {
    const auto v = basis::p2_values(xi, eta);
    for (int a = 0; a < 6; ++a) s += coeffs[space.cell_nodes[e][a]] * v[a];
  }
  return s;
}

std::vector<int> mirror_scalar_map(const FESpace& space, double height, double tol) {
  std::map<std::pair<long long, long long>, int> index;
  auto key = [tol](double x, double y) { return std::make_pair(std::llround(x / tol), std::llround(y / tol)); };
  for (int i = 0; i < space.n_scalar(); ++i) index[key(space.points[i].x, space.points[i].y)] = i;
  std::vector<int> map(space.n_scalar());
  for (int i = 0; i < space.n_scalar(); ++i) {
    const auto it = index.find(key(space.points[i].x, height - space.points[i].y));
    if (it == index.end()) throw DofError("node set is not mirror symmetric");
    map[i] = it->second;
  }
  return map;
}

Vector mirror_vector_field(const FESpace& space, const std::vector<int>& map, const Vector& coeffs) {
  Vector out(coeffs.size());
  for (int i = 0; i < space.n_scalar(); ++i) {
    out[space.dof(i, 0)] = coeffs[space.dof(map[i], 0)];
    out[space.dof(i, 1)] = -coeffs[space.dof(map[i], 1)];
  }
  return out;
}

Vector mirror_scalar_field(const std::vector<int>& map, const Vector& coeffs) {
  Vector out(coeffs.size());
  for (std::size_t i = 0; i < map.size(); ++i) out[static_cast<Eigen::Index>(i)] = coeffs[map[i]];
  return out;
}

}  // namespace fsisens
