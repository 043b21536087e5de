#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fsisens/mesh.hpp"

namespace fsisens {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

// ---------------------------------------------------------------------------------------------
// quadrature and reference basis

/// Points in reference coordinates (xi, eta) of the unit right triangle; weights sum to one so
/// that an element integral is `area * sum_q w_q f(x_q)`.
struct QuadratureRule {
  std::vector<std::array<double, 2>> points;
  std::vector<double> weights;
  std::size_t size() const { return weights.size(); }
};

/// Symmetric 12-point rule, exact for polynomials of degree 6.
const QuadratureRule& triangle_rule();
/// Gauss-Legendre rule on [0, 1] stored as (t, 0); weights sum to one.
const QuadratureRule& edge_rule();

namespace basis {
// Local node order: v0, v1, v2, m01, m12, m20.
std::array<double, 6> p2_values(double xi, double eta);
std::array<Vec2, 6> p2_gradients(double xi, double eta);
const std::array<Mat2, 6>& p2_hessians();
std::array<double, 3> p1_values(double xi, double eta);
const std::array<Vec2, 3>& p1_gradients();
}  // namespace basis

// ---------------------------------------------------------------------------------------------
// topology and spaces

/// Quadratic node layout over the whole mesh: vertices first, then one midpoint per edge.
struct P2Topology {
  int n_vertices = 0;
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 3>> triangle_edges;  // local edge k joins v_k and v_{k+1}
  std::vector<Point> points;

  explicit P2Topology(const Mesh& mesh);
  int n_nodes() const { return static_cast<int>(points.size()); }
  std::array<int, 6> triangle_nodes(const Mesh& mesh, int t) const;
  int edge_midpoint(int a, int b) const;

 private:
  std::vector<std::vector<std::pair<int, int>>> vertex_edges_;  // vertex -> (other, edge)
};

enum class Arity { scalar, vector };

struct SpaceDescriptor {
  int order = 2;
  Arity arity = Arity::vector;
  Subdomain subdomain = Subdomain::fluid;
  friend bool operator==(const SpaceDescriptor&, const SpaceDescriptor&) = default;

  int components() const { return arity == Arity::vector ? 2 : 1; }
};

namespace spaces {
inline constexpr SpaceDescriptor velocity{2, Arity::vector, Subdomain::fluid};
inline constexpr SpaceDescriptor pressure{1, Arity::scalar, Subdomain::fluid};
inline constexpr SpaceDescriptor displacement{2, Arity::vector, Subdomain::solid};
inline constexpr SpaceDescriptor fluid_scalar{2, Arity::scalar, Subdomain::fluid};
inline constexpr SpaceDescriptor solid_scalar{2, Arity::scalar, Subdomain::solid};
}  // namespace spaces

/// Lagrange space restricted to one subdomain. Vector dofs are blocked by component:
/// dof(i, c) = c * n_scalar + i.
struct FESpace {
  SpaceDescriptor descriptor;
  std::vector<int> elements;                  // triangle ids, ascending
  std::vector<std::array<int, 6>> cell_nodes;  // local scalar indices (3 used for order 1)
  std::vector<int> global_node;               // scalar index -> topology node
  std::vector<Point> points;
  std::vector<int> scalar_of_global;          // topology node -> scalar index or -1

  int n_scalar() const { return static_cast<int>(global_node.size()); }
  int n_components() const { return descriptor.components(); }
  int n_dofs() const { return n_scalar() * n_components(); }
  int nodes_per_cell() const { return descriptor.order == 2 ? 6 : 3; }
  int dof(int scalar, int comp) const { return comp * n_scalar() + scalar; }
};

/// Coefficient vector bound to a space descriptor.
struct FEFunction {
  SpaceDescriptor space;
  Vector coefficients;

  FEFunction() = default;
  FEFunction(SpaceDescriptor s, Vector c) : space(s), coefficients(std::move(c)) {}
  static FEFunction zero(const FESpace& s) { return {s.descriptor, Vector::Zero(s.n_dofs())}; }
};

struct ElementGeometry {
  Point origin;
  Mat2 jacobian;        // columns v1 - v0, v2 - v0
  Mat2 inv_jacobian_t;  // maps reference gradients to physical gradients
  double area = 0.0;

  Point map(double xi, double eta) const {
    return {origin.x + jacobian(0, 0) * xi + jacobian(0, 1) * eta,
            origin.y + jacobian(1, 0) * xi + jacobian(1, 1) * eta};
  }
};

/// A tagged edge with its quadratic midpoint and the outward normal of the owning subdomain
/// (the fluid side for interface edges, so the normal points into the solid).
struct TaggedEdge {
  int a = -1, b = -1, mid = -1;  // topology nodes
  BoundaryTag tag = BoundaryTag::wall;
  int triangle = -1;  // owning triangle (fluid triangle for interface edges)
  int local_edge = -1;
  Vec2 normal = Vec2::Zero();
  double length = 0.0;
};

class DofError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything derived from a mesh once: quadratic topology, the Taylor-Hood fluid spaces, the
/// solid displacement space, element geometry and the norm matrices.
class Discretization {
 public:
  explicit Discretization(Mesh mesh);

  const Mesh& mesh() const { return mesh_; }
  const P2Topology& topology() const { return topology_; }
  const FESpace& space(const SpaceDescriptor& d) const;
  const FESpace& velocity() const { return space(spaces::velocity); }
  const FESpace& pressure() const { return space(spaces::pressure); }
  const FESpace& displacement() const { return space(spaces::displacement); }
  const ElementGeometry& geometry(int triangle) const { return geometry_[triangle]; }
  const std::vector<TaggedEdge>& tagged_edges() const { return tagged_edges_; }
  bool has_tag(BoundaryTag t) const;
  bool has_solid() const { return !space(spaces::displacement).elements.empty(); }

  /// Scalar mass and stiffness matrices of a scalar space (order 1 or 2, either subdomain).
  const SparseMatrix& mass(const SpaceDescriptor& scalar) const;
  const SparseMatrix& stiffness(const SpaceDescriptor& scalar) const;

  double l2_norm(const FEFunction& f) const;
  double h1_norm(const FEFunction& f) const;

 private:
  Mesh mesh_;
  P2Topology topology_;
  std::vector<FESpace> spaces_;
  std::vector<ElementGeometry> geometry_;
  std::vector<TaggedEdge> tagged_edges_;
  std::vector<SparseMatrix> mass_, stiffness_;  // index of the scalar space in spaces_
};

/// Dofs whose nodal points lie on edges carrying `tag` (endpoints included, so corner nodes
/// appear in the sets of both adjacent tags). Sorted ascending; all components for vector
/// spaces.
std::vector<int> boundary_dofs(const Discretization& disc, const SpaceDescriptor& space,
                               BoundaryTag tag);
bool tag_adjacent(const SpaceDescriptor& space, BoundaryTag tag);

/// Priority for corner nodes claimed by several Dirichlet tags: wall > inflow > interface.
int dirichlet_priority(BoundaryTag tag);

/// Nodal interpolation of a 2-vector function into a vector space (or a scalar into a scalar
/// space, using the first component).
FEFunction interpolate(const Discretization& disc, const SpaceDescriptor& space,
                       const std::function<Vec2(const Point&)>& f);

/// Scalar index of the reflection of every node of `space` across y = height / 2. Throws
/// DofError when the node set is not mirror symmetric.
std::vector<int> mirror_scalar_map(const FESpace& space, double height, double tol = 1e-9);

/// Reflection of a vector field: w(x, H - y) = (w1, -w2)(x, y), applied to the coefficients.
Vector mirror_vector_field(const FESpace& space, const std::vector<int>& map, const Vector& coeffs);
/// Reflection of a scalar field.
Vector mirror_scalar_field(const std::vector<int>& map, const Vector& coeffs);

// ---------------------------------------------------------------------------------------------
// element-parallel assembly

void set_num_threads(int n);
int num_threads();
/// Static chunking over [0, n); `body(i)` must only write to per-index storage.
void parallel_for(int n, const std::function<void(int)>& body);

struct LocalMatrix {
  std::vector<int> rows, cols;
  Eigen::MatrixXd values;
};
struct LocalVector {
  std::vector<int> rows;
  Eigen::VectorXd values;
};

/// Element contributions are computed in parallel into per-element buffers and scattered in
/// element order, so the result does not depend on the thread count.
SparseMatrix assemble_matrix(int n_rows, int n_cols, int n_elements,
                             const std::function<void(int, LocalMatrix&)>& local);
Vector assemble_vector(int n_rows, int n_elements,
                       const std::function<void(int, LocalVector&)>& local);

/// Physical basis gradients of the quadratic element at reference point (xi, eta).
std::array<Vec2, 6> p2_physical_gradients(const ElementGeometry& g, double xi, double eta);
std::array<Vec2, 3> p1_physical_gradients(const ElementGeometry& g);

/// Value and gradient of a vector P2 function at a point of element `e` (index into the
/// space's element list). Row i of the gradient is grad of component i.
struct VectorSample {
  Vec2 value;
  Mat2 gradient;
};
VectorSample sample_vector(const Discretization& disc, const FESpace& space, const Vector& coeffs,
                           int e, double xi, double eta);
double sample_scalar(const FESpace& space, const Vector& coeffs, int e, double xi, double eta);

}  // namespace fsisens
