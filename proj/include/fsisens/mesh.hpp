#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fsisens {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

enum class Subdomain : std::uint8_t { fluid, solid };

enum class BoundaryTag : std::uint8_t { inflow, wall, outflow, interface, clamped };

inline constexpr std::array<BoundaryTag, 5> all_boundary_tags = {
    BoundaryTag::inflow, BoundaryTag::wall, BoundaryTag::outflow, BoundaryTag::interface,
    BoundaryTag::clamped};

std::string_view to_string(Subdomain s);
std::string_view to_string(BoundaryTag t);
Subdomain parse_subdomain(std::string_view s);
BoundaryTag parse_boundary_tag(std::string_view s);

/// Raised when a channel geometry violates one of its invariants. `rule()` names the
/// violated invariant ("clearance", "containment", "edge_length", ...).
class GeometryError : public std::invalid_argument {
 public:
  GeometryError(std::string rule, const std::string& what)
      : std::invalid_argument(rule + ": " + what), rule_(std::move(rule)) {}
  const std::string& rule() const noexcept { return rule_; }

 private:
  std::string rule_;
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Polygon = std::vector<Point>;

/// Rectangular channel with an optional annular obstacle. The obstacle polygons must be
/// axis-aligned rectangles for the structured mesher; `obstacle_inner` is the clamped hole.
struct ChannelGeometry {
  double channel_length = 4.0;
  double channel_height = 1.0;
  std::optional<Polygon> obstacle_outer;
  std::optional<Polygon> obstacle_inner;
  double target_edge_length = 0.08;

  /// Channel 4x1, square obstacle of side 0.4 centred at (1.2, 0.5), inner square of side 0.2.
  static ChannelGeometry default_geometry(double h = 0.08);
  /// Straight channel without obstacle.
  static ChannelGeometry straight_channel(double length, double height, double h);

  void validate() const;
};

Polygon axis_aligned_square(Point center, double side);

struct Triangle {
  std::array<int, 3> v{};
  Subdomain domain = Subdomain::fluid;
};

struct BoundaryEdge {
  std::array<int, 2> v{};
  BoundaryTag tag = BoundaryTag::wall;
};

struct Mesh {
  std::vector<Point> nodes;
  std::vector<Triangle> triangles;
  std::vector<BoundaryEdge> boundary_edges;

  double channel_length = 0.0;
  double channel_height = 0.0;

  std::size_t count_triangles(Subdomain s) const;
  std::size_t count_edges(BoundaryTag t) const;
  double area(Subdomain s) const;
  double tagged_length(BoundaryTag t) const;
  double max_edge_length() const;
};

double signed_area(const Point& a, const Point& b, const Point& c);

Mesh build_channel_mesh(const ChannelGeometry& geom);

/// Red refinement: every triangle is split into four, boundary tags are inherited.
Mesh refine_uniform(const Mesh& mesh);

/// Topology summary produced by an independent half-edge traversal.
struct MeshReport {
  std::size_t vertices = 0;
  std::size_t edges = 0;
  std::size_t faces = 0;
  std::size_t boundary_loops = 0;
  long euler_characteristic = 0;  // V - E + F over triangles only
  bool all_positive = true;
  bool conforming = true;
  bool tags_partition = true;
  bool interface_conforming = true;
  bool exterior_snapped = true;
  double min_area = 0.0;
  std::vector<std::string> problems;

  bool ok() const { return problems.empty(); }
};

MeshReport validate_mesh(const Mesh& mesh);

/// Permutation `perm` with nodes[perm[i]] the reflection of nodes[i] across y = H/2, if the
/// mesh is mirror symmetric (triangles and tags included).
std::optional<std::vector<int>> mirror_permutation(const Mesh& mesh, double tol = 1e-12);

void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);
void write_mesh_vtk(std::ostream& os, const Mesh& mesh);

}  // namespace fsisens
