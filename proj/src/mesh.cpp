#include "fsisens/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace fsisens {

std::string_view to_string(Subdomain s) { return s == Subdomain::fluid ? "fluid" : "solid"; }

std::string_view to_string(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::inflow: return "inflow";
    case BoundaryTag::wall: return "wall";
    case BoundaryTag::outflow: return "outflow";
    case BoundaryTag::interface: return "interface";
    case BoundaryTag::clamped: return "clamped";
  }
  return "unknown";
}

Subdomain parse_subdomain(std::string_view s) {
  if (s == "fluid") return Subdomain::fluid;
  if (s == "solid") return Subdomain::solid;
  throw MeshError("unknown subdomain label '" + std::string(s) + "'");
}

BoundaryTag parse_boundary_tag(std::string_view s) {
  for (auto t : all_boundary_tags)
    if (to_string(t) == s) return t;
  throw MeshError("unknown boundary tag '" + std::string(s) + "'");
}

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

Polygon axis_aligned_square(Point c, double side) {
  const double h = 0.5 * side;
  return {{c.x - h, c.y - h}, {c.x + h, c.y - h}, {c.x + h, c.y + h}, {c.x - h, c.y + h}};
}

ChannelGeometry ChannelGeometry::default_geometry(double h) {
  ChannelGeometry g;
  g.channel_length = 4.0;
  g.channel_height = 1.0;
  g.obstacle_outer = axis_aligned_square({1.2, 0.5}, 0.4);
  g.obstacle_inner = axis_aligned_square({1.2, 0.5}, 0.2);
  g.target_edge_length = h;
  return g;
}

ChannelGeometry ChannelGeometry::straight_channel(double length, double height, double h) {
  ChannelGeometry g;
  g.channel_length = length;
  g.channel_height = height;
  g.target_edge_length = h;
  return g;
}

namespace {

struct Box {
  double x0, y0, x1, y1;
  bool strictly_contains(const Box& o) const {
    return o.x0 > x0 && o.y0 > y0 && o.x1 < x1 && o.y1 < y1;
  }
  bool contains(double x, double y) const { return x > x0 && x < x1 && y > y0 && y < y1; }
};

Box as_box(const Polygon& poly, const char* name) {
  if (poly.size() != 4)
    throw GeometryError("unsupported_polygon", std::string(name) + " must have 4 vertices");
  double x0 = poly[0].x, x1 = poly[0].x, y0 = poly[0].y, y1 = poly[0].y;
  for (const auto& p : poly) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  for (const auto& p : poly) {
    const bool on_x = p.x == x0 || p.x == x1;
    const bool on_y = p.y == y0 || p.y == y1;
    if (!on_x || !on_y)
      throw GeometryError("unsupported_polygon",
                          std::string(name) + " must be an axis-aligned rectangle");
  }
  if (!(x1 > x0) || !(y1 > y0))
    throw GeometryError("degenerate_polygon", std::string(name) + " has zero area");
  return {x0, y0, x1, y1};
}

}  // namespace

void ChannelGeometry::validate() const {
  if (!(channel_length > 0.0) || !(channel_height > 0.0))
    throw GeometryError("channel_size", "channel length and height must be positive");
  if (!(target_edge_length > 0.0))
    throw GeometryError("edge_length", "target_edge_length must be positive");
  if (obstacle_outer.has_value() != obstacle_inner.has_value())
    throw GeometryError("obstacle", "outer and inner obstacle polygons come in pairs");
  if (!obstacle_outer) return;
  const Box channel{0.0, 0.0, channel_length, channel_height};
  const Box outer = as_box(*obstacle_outer, "obstacle_outer");
  const Box inner = as_box(*obstacle_inner, "obstacle_inner");
  if (!channel.strictly_contains(outer))
    throw GeometryError("clearance",
                        "obstacle_outer must keep positive distance to every channel side");
  if (!outer.strictly_contains(inner))
    throw GeometryError("containment", "obstacle_inner must lie strictly inside obstacle_outer");
}

std::size_t Mesh::count_triangles(Subdomain s) const {
  return static_cast<std::size_t>(
      std::count_if(triangles.begin(), triangles.end(), [s](const Triangle& t) { return t.domain == s; }));
}

std::size_t Mesh::count_edges(BoundaryTag tag) const {
  return static_cast<std::size_t>(std::count_if(
      boundary_edges.begin(), boundary_edges.end(), [tag](const BoundaryEdge& e) { return e.tag == tag; }));
}

double Mesh::area(Subdomain s) const {
  double a = 0.0;
  for (const auto& t : triangles)
    if (t.domain == s) a += signed_area(nodes[t.v[0]], nodes[t.v[1]], nodes[t.v[2]]);
  return a;
}

double Mesh::tagged_length(BoundaryTag tag) const {
  double l = 0.0;
  for (const auto& e : boundary_edges)
    if (e.tag == tag) l += std::hypot(nodes[e.v[1]].x - nodes[e.v[0]].x, nodes[e.v[1]].y - nodes[e.v[0]].y);
  return l;
}

double Mesh::max_edge_length() const {
  double m = 0.0;
  for (const auto& t : triangles)
    for (int k = 0; k < 3; ++k) {
      const auto& a = nodes[t.v[k]];
      const auto& b = nodes[t.v[(k + 1) % 3]];
      m = std::max(m, std::hypot(b.x - a.x, b.y - a.y));
    }
  return m;
}

namespace {

using EdgeKey = std::pair<int, int>;
EdgeKey key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

std::vector<double> subdivide(std::vector<double> breaks, double h) {
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::vector<double> out{breaks.front()};
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k], b = breaks[k + 1];
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-9)));
    for (int i = 1; i < n; ++i) out.push_back(a + (b - a) * i / n);
    out.push_back(b);
  }
  return out;
}

// Tags every edge that has a single adjacent triangle or separates the two subdomains.
// Edges are oriented like the adjacent triangle (fluid triangle for interface edges), so the
// owning domain lies to the left.
std::vector<BoundaryEdge> tag_boundary(const Mesh& m) {
  std::map<EdgeKey, std::vector<std::pair<int, int>>> adj;  // edge -> (triangle, local edge)
  for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t)
    for (int k = 0; k < 3; ++k)
      adj[key(m.triangles[t].v[k], m.triangles[t].v[(k + 1) % 3])].push_back({t, k});

  std::vector<BoundaryEdge> out;
  for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
    const auto& tri = m.triangles[t];
    for (int k = 0; k < 3; ++k) {
      const int a = tri.v[k], b = tri.v[(k + 1) % 3];
      const auto& owners = adj.at(key(a, b));
      if (owners.size() == 1) {
        const Point& pa = m.nodes[a];
        const Point& pb = m.nodes[b];
        BoundaryTag tag = BoundaryTag::clamped;
        if (pa.x == 0.0 && pb.x == 0.0)
          tag = BoundaryTag::inflow;
        else if (pa.x == m.channel_length && pb.x == m.channel_length)
          tag = BoundaryTag::outflow;
        else if ((pa.y == 0.0 && pb.y == 0.0) ||
                 (pa.y == m.channel_height && pb.y == m.channel_height))
          tag = BoundaryTag::wall;
        out.push_back({{a, b}, tag});
      } else if (owners.size() == 2 && tri.domain == Subdomain::fluid) {
        const int other = owners[0].first == t ? owners[1].first : owners[0].first;
        if (m.triangles[other].domain == Subdomain::solid)
          out.push_back({{a, b}, BoundaryTag::interface});
      }
    }
  }
  return out;
}

}  // namespace

Mesh build_channel_mesh(const ChannelGeometry& geom) {
  geom.validate();
  const double L = geom.channel_length;
  const double H = geom.channel_height;
  std::vector<double> xb{0.0, L}, yb{0.0, H};
  std::optional<Box> outer, inner;
  if (geom.obstacle_outer) {
    outer = as_box(*geom.obstacle_outer, "obstacle_outer");
    inner = as_box(*geom.obstacle_inner, "obstacle_inner");
    xb.insert(xb.end(), {outer->x0, outer->x1, inner->x0, inner->x1});
    yb.insert(yb.end(), {outer->y0, outer->y1, inner->y0, inner->y1});
  }
  const auto xs = subdivide(xb, geom.target_edge_length);
  const auto ys = subdivide(yb, geom.target_edge_length);
  const int nx = static_cast<int>(xs.size()) - 1;
  const int ny = static_cast<int>(ys.size()) - 1;

  // cell classification: -1 hole, 0 fluid, 1 solid
  std::vector<int> cell(static_cast<std::size_t>(nx) * ny, 0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double xc = 0.5 * (xs[i] + xs[i + 1]);
      const double yc = 0.5 * (ys[j] + ys[j + 1]);
      int c = 0;
      if (inner && inner->contains(xc, yc))
        c = -1;
      else if (outer && outer->contains(xc, yc))
        c = 1;
      cell[j * nx + i] = c;
    }
  auto cell_at = [&](int i, int j) {
    if (i < 0 || j < 0 || i >= nx || j >= ny) return -1;
    return cell[j * nx + i];
  };

  Mesh m;
  m.channel_length = L;
  m.channel_height = H;
  std::vector<int> grid_id(static_cast<std::size_t>(nx + 1) * (ny + 1), -1);
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const bool used = cell_at(i - 1, j - 1) >= 0 || cell_at(i, j - 1) >= 0 ||
                        cell_at(i - 1, j) >= 0 || cell_at(i, j) >= 0;
      if (!used) continue;
      grid_id[j * (nx + 1) + i] = static_cast<int>(m.nodes.size());
      m.nodes.push_back({xs[i], ys[j]});
    }

  const double mid = 0.5 * H;
  for (int j = 0; j < ny; ++j) {
    const double yc = 0.5 * (ys[j] + ys[j + 1]);
    for (int i = 0; i < nx; ++i) {
      const int c = cell[j * nx + i];
      if (c < 0) continue;
      const Subdomain dom = c == 1 ? Subdomain::solid : Subdomain::fluid;
      const int v00 = grid_id[j * (nx + 1) + i];
      const int v10 = grid_id[j * (nx + 1) + i + 1];
      const int v01 = grid_id[(j + 1) * (nx + 1) + i];
      const int v11 = grid_id[(j + 1) * (nx + 1) + i + 1];
      // diagonals mirror across the channel mid-line; a row centred on it gets a cross split
      if (std::abs(yc - mid) <= 1e-12 * H) {
        const int vc = static_cast<int>(m.nodes.size());
        m.nodes.push_back({0.5 * (xs[i] + xs[i + 1]), yc});
        m.triangles.push_back({{v00, v10, vc}, dom});
        m.triangles.push_back({{v10, v11, vc}, dom});
        m.triangles.push_back({{v11, v01, vc}, dom});
        m.triangles.push_back({{v01, v00, vc}, dom});
      } else if (yc < mid) {
        m.triangles.push_back({{v00, v10, v11}, dom});
        m.triangles.push_back({{v00, v11, v01}, dom});
      } else {
        m.triangles.push_back({{v00, v10, v01}, dom});
        m.triangles.push_back({{v10, v11, v01}, dom});
      }
    }
  }
  m.boundary_edges = tag_boundary(m);
  return m;
}

Mesh refine_uniform(const Mesh& mesh) {
  Mesh out;
  out.channel_length = mesh.channel_length;
  out.channel_height = mesh.channel_height;
  out.nodes = mesh.nodes;
  std::map<EdgeKey, int> midpoint;
  auto mid = [&](int a, int b) {
    auto [it, inserted] = midpoint.try_emplace(key(a, b), static_cast<int>(out.nodes.size()));
    if (inserted) {
      const Point& pa = mesh.nodes[a];
      const Point& pb = mesh.nodes[b];
      out.nodes.push_back({0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)});
    }
    return it->second;
  };
  out.triangles.reserve(4 * mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    const int a = t.v[0], b = t.v[1], c = t.v[2];
    const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    out.triangles.push_back({{a, ab, ca}, t.domain});
    out.triangles.push_back({{ab, b, bc}, t.domain});
    out.triangles.push_back({{ca, bc, c}, t.domain});
    out.triangles.push_back({{ab, bc, ca}, t.domain});
  }
  for (const auto& e : mesh.boundary_edges) {
    const int m = midpoint.at(key(e.v[0], e.v[1]));
    out.boundary_edges.push_back({{e.v[0], m}, e.tag});
    out.boundary_edges.push_back({{m, e.v[1]}, e.tag});
  }
  return out;
}

MeshReport validate_mesh(const Mesh& mesh) {
  MeshReport r;
  auto problem = [&r](std::string s) { r.problems.push_back(std::move(s)); };

  // half-edge table: directed edge -> owning triangle
  std::map<std::pair<int, int>, int> half;
  std::vector<char> used(mesh.nodes.size(), 0);
  r.min_area = mesh.triangles.empty() ? 0.0 : 1e300;
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const auto& tri = mesh.triangles[t];
    const double a = signed_area(mesh.nodes[tri.v[0]], mesh.nodes[tri.v[1]], mesh.nodes[tri.v[2]]);
    r.min_area = std::min(r.min_area, a);
    if (!(a > 0.0)) {
      r.all_positive = false;
      problem("triangle " + std::to_string(t) + " is not positively oriented");
    }
    for (int k = 0; k < 3; ++k) {
      used[tri.v[k]] = 1;
      const auto he = std::make_pair(tri.v[k], tri.v[(k + 1) % 3]);
      if (!half.emplace(he, t).second) {
        r.conforming = false;
        problem("half-edge repeated at triangle " + std::to_string(t));
      }
    }
  }
  r.vertices = static_cast<std::size_t>(std::count(used.begin(), used.end(), 1));
  r.faces = mesh.triangles.size();

  std::size_t undirected = 0;
  std::map<int, std::vector<int>> boundary_next;  // boundary half-edges by origin
  std::map<std::pair<int, int>, bool> boundary_half;
  for (const auto& [he, t] : half) {
    const auto twin = std::make_pair(he.second, he.first);
    auto it = half.find(twin);
    if (it == half.end()) {
      ++undirected;
      boundary_next[he.first].push_back(he.second);
      boundary_half[he] = true;
    } else if (he.first < he.second) {
      ++undirected;
    }
  }
  r.edges = undirected;
  r.euler_characteristic = static_cast<long>(r.vertices) - static_cast<long>(r.edges) +
                           static_cast<long>(r.faces);

  // walk boundary loops
  std::map<std::pair<int, int>, bool> visited;
  for (const auto& [he, _] : boundary_half) {
    if (visited[he]) continue;
    ++r.boundary_loops;
    auto cur = he;
    for (std::size_t guard = 0; guard <= boundary_half.size(); ++guard) {
      visited[cur] = true;
      const auto& nexts = boundary_next[cur.second];
      if (nexts.size() != 1) {
        r.conforming = false;
        problem("boundary vertex " + std::to_string(cur.second) + " is not manifold");
        break;
      }
      cur = {cur.second, nexts.front()};
      if (cur == he) break;
    }
  }

  // tags: union boundary + interface, each edge exactly once
  std::map<std::pair<int, int>, int> tag_count;
  for (const auto& e : mesh.boundary_edges) {
    const auto k = key(e.v[0], e.v[1]);
    ++tag_count[k];
    const bool is_boundary =
        boundary_half.count({e.v[0], e.v[1]}) || boundary_half.count({e.v[1], e.v[0]});
    if (e.tag == BoundaryTag::interface) {
      auto a = half.find({e.v[0], e.v[1]});
      auto b = half.find({e.v[1], e.v[0]});
      if (a == half.end() || b == half.end() ||
          mesh.triangles[a->second].domain == mesh.triangles[b->second].domain) {
        r.interface_conforming = false;
        problem("interface edge not shared by a fluid and a solid triangle");
      }
    } else if (!is_boundary) {
      r.tags_partition = false;
      problem("tagged edge is not on the union boundary");
    }
    const Point& pa = mesh.nodes[e.v[0]];
    const Point& pb = mesh.nodes[e.v[1]];
    const bool snapped =
        (e.tag == BoundaryTag::inflow && pa.x == 0.0 && pb.x == 0.0) ||
        (e.tag == BoundaryTag::outflow && pa.x == mesh.channel_length && pb.x == mesh.channel_length) ||
        (e.tag == BoundaryTag::wall && ((pa.y == 0.0 && pb.y == 0.0) ||
                                        (pa.y == mesh.channel_height && pb.y == mesh.channel_height))) ||
        e.tag == BoundaryTag::interface || e.tag == BoundaryTag::clamped;
    if (!snapped) {
      r.exterior_snapped = false;
      problem("exterior edge off its channel side");
    }
  }
  for (const auto& [k, c] : tag_count)
    if (c != 1) {
      r.tags_partition = false;
      problem("edge tagged more than once");
    }
  for (const auto& [he, _] : boundary_half)
    if (!tag_count.count(key(he.first, he.second))) {
      r.tags_partition = false;
      problem("untagged boundary edge");
    }
  // every fluid/solid adjacency must be tagged as interface
  for (const auto& [he, t] : half) {
    auto it = half.find({he.second, he.first});
    if (it == half.end() || he.first > he.second) continue;
    if (mesh.triangles[t].domain != mesh.triangles[it->second].domain &&
        !tag_count.count(key(he.first, he.second))) {
      r.interface_conforming = false;
      problem("untagged fluid/solid interface edge");
    }
  }
  // planar region with (loops - 1) holes: V - E + F = 2 - loops
  if (r.euler_characteristic + static_cast<long>(r.boundary_loops) != 2)
    problem("Euler characteristic inconsistent with boundary loop count");
  return r;
}

std::optional<std::vector<int>> mirror_permutation(const Mesh& mesh, double tol) {
  const double H = mesh.channel_height;
  const double scale = 1.0 / std::max(tol, 1e-300);
  auto hash_key = [&](double x, double y) {
    return std::make_pair(std::llround(x * scale), std::llround(y * scale));
  };
  std::map<std::pair<long long, long long>, int> lookup;
  for (int i = 0; i < static_cast<int>(mesh.nodes.size()); ++i)
    lookup[hash_key(mesh.nodes[i].x, mesh.nodes[i].y)] = i;
  std::vector<int> perm(mesh.nodes.size(), -1);
  for (int i = 0; i < static_cast<int>(mesh.nodes.size()); ++i) {
    const auto& p = mesh.nodes[i];
    auto it = lookup.find(hash_key(p.x, H - p.y));
    if (it == lookup.end()) return std::nullopt;
    perm[i] = it->second;
  }
  auto sorted = [](std::array<int, 3> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  std::map<std::array<int, 3>, Subdomain> tris;
  for (const auto& t : mesh.triangles) tris[sorted(t.v)] = t.domain;
  for (const auto& t : mesh.triangles) {
    auto it = tris.find(sorted({perm[t.v[0]], perm[t.v[1]], perm[t.v[2]]}));
    if (it == tris.end() || it->second != t.domain) return std::nullopt;
  }
  std::map<EdgeKey, BoundaryTag> edges;
  for (const auto& e : mesh.boundary_edges) edges[key(e.v[0], e.v[1])] = e.tag;
  for (const auto& e : mesh.boundary_edges) {
    auto it = edges.find(key(perm[e.v[0]], perm[e.v[1]]));
    if (it == edges.end() || it->second != e.tag) return std::nullopt;
  }
  return perm;
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  os << "# fsisens mesh v1\n" << std::setprecision(17);
  os << "channel " << mesh.channel_length << ' ' << mesh.channel_height << '\n';
  os << "nodes " << mesh.nodes.size() << '\n';
  for (const auto& p : mesh.nodes) os << p.x << ' ' << p.y << '\n';
  os << "triangles " << mesh.triangles.size() << '\n';
  for (const auto& t : mesh.triangles)
    os << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << ' ' << to_string(t.domain) << '\n';
  os << "edges " << mesh.boundary_edges.size() << '\n';
  for (const auto& e : mesh.boundary_edges)
    os << e.v[0] << ' ' << e.v[1] << ' ' << to_string(e.tag) << '\n';
}

Mesh read_mesh(std::istream& is) {
  Mesh m;
  std::string line, word;
  auto next_line = [&]() -> std::istringstream {
    while (std::getline(is, line))
      if (!line.empty() && line[0] != '#') return std::istringstream(line);
    throw MeshError("unexpected end of mesh file");
  };
  auto expect = [&](std::istringstream& ss, const char* kw) {
    ss >> word;
    if (word != kw) throw MeshError(std::string("expected '") + kw + "', got '" + word + "'");
  };
  {
    auto ss = next_line();
    expect(ss, "channel");
    ss >> m.channel_length >> m.channel_height;
  }
  std::size_t n = 0;
  {
    auto ss = next_line();
    expect(ss, "nodes");
    ss >> n;
  }
  m.nodes.resize(n);
  for (auto& p : m.nodes) {
    auto ss = next_line();
    ss >> p.x >> p.y;
  }
  {
    auto ss = next_line();
    expect(ss, "triangles");
    ss >> n;
  }
  m.triangles.resize(n);
  for (auto& t : m.triangles) {
    auto ss = next_line();
    ss >> t.v[0] >> t.v[1] >> t.v[2] >> word;
    t.domain = parse_subdomain(word);
  }
  {
    auto ss = next_line();
    expect(ss, "edges");
    ss >> n;
  }
  m.boundary_edges.resize(n);
  for (auto& e : m.boundary_edges) {
    auto ss = next_line();
    ss >> e.v[0] >> e.v[1] >> word;
    e.tag = parse_boundary_tag(word);
  }
  return m;
}

void write_mesh_vtk(std::ostream& os, const Mesh& mesh) {
  os << "# vtk DataFile Version 3.0\nfsisens mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << std::setprecision(17);
  os << "POINTS " << mesh.nodes.size() << " double\n";
  for (const auto& p : mesh.nodes) os << p.x << ' ' << p.y << " 0\n";
  const std::size_t nt = mesh.triangles.size(), ne = mesh.boundary_edges.size();
  os << "CELLS " << nt + ne << ' ' << 4 * nt + 3 * ne << '\n';
  for (const auto& t : mesh.triangles) os << "3 " << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << '\n';
  for (const auto& e : mesh.boundary_edges) os << "2 " << e.v[0] << ' ' << e.v[1] << '\n';
  os << "CELL_TYPES " << nt + ne << '\n';
  for (std::size_t i = 0; i < nt; ++i) os << "5\n";
  for (std::size_t i = 0; i < ne; ++i) os << "3\n";
  os << "CELL_DATA " << nt + ne << "\nSCALARS subdomain int 1\nLOOKUP_TABLE default\n";
  for (const auto& t : mesh.triangles) os << (t.domain == Subdomain::fluid ? 0 : 1) << '\n';
  for (std::size_t i = 0; i < ne; ++i) os << "-1\n";
  os << "SCALARS tag int 1\nLOOKUP_TABLE default\n";
  for (std::size_t i = 0; i < nt; ++i) os << "-1\n";
  for (const auto& e : mesh.boundary_edges) os << static_cast<int>(e.tag) << '\n';
}

}  // namespace fsisens
