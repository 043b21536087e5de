#pragma once

#include <cmath>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsisens/fem.hpp"
#include "fsisens/linalg.hpp"

namespace fsisens {

/// Smallest admissible eigenvalue of the diffusion field A.
inline constexpr double ellipticity_floor = 0.25;

class MeshTanglingError : public std::runtime_error {
 public:
  MeshTanglingError(int element, double det)
      : std::runtime_error("mesh tangling: det(DPhi) = " + std::to_string(det) + " at element " +
                           std::to_string(element)),
        element_(element) {}
  int element() const noexcept { return element_; }

 private:
  int element_;
};

class AdmissibilityError : public std::runtime_error {
 public:
  AdmissibilityError(int element, double eig)
      : std::runtime_error("transform not admissible: min eig(A) = " + std::to_string(eig) +
                           " below floor at element " + std::to_string(element)),
        element_(element) {}
  int element() const noexcept { return element_; }

 private:
  int element_;
};

/// 2x2 cofactor, cof(M) = det(M) M^{-T}. Linear in M in two dimensions.
inline Mat2 cofactor(const Mat2& m) {
  Mat2 c;
  c << m(1, 1), -m(1, 0), -m(0, 1), m(0, 0);
  return c;
}

inline double min_eigenvalue_sym(const Mat2& a) {
  const double mean = 0.5 * (a(0, 0) + a(1, 1));
  const double r = std::hypot(0.5 * (a(0, 0) - a(1, 1)), 0.5 * (a(0, 1) + a(1, 0)));
  return mean - r;
}

struct PointTransform {
  Mat2 dphi;  // D Phi = I + grad(phi)
  double J;
  Mat2 K;  // cof(D Phi)
  Mat2 A;  // J^{-1} K^T K
};

/// Pullback quantities for a displacement gradient. With the physical gradient equal to
/// J^{-1} K grad_x, the viscous coefficient is A = J^{-1} K^T K.
PointTransform transform_at(const Mat2& grad_phi);

struct PointDerivative {
  Mat2 d_dphi;
  double dJ;
  Mat2 dK;
  Mat2 dA;
};

/// Directional derivative along a displacement gradient perturbation: Jacobi's formula for J,
/// linearity of the 2D cofactor for K, and the quotient rule for A.
PointDerivative transform_derivative_at(const PointTransform& base, const Mat2& grad_dphi);

/// Per quadrature point of every fluid element (velocity-space element order).
struct TransformFields {
  int n_elements = 0;
  int n_qp = 0;
  std::vector<Mat2> dphi, K, A;
  std::vector<double> J;
  double min_J = 1.0;
  double min_eig_A = 1.0;
  int worst_element = -1;  // triangle id with the smallest eig(A)
  bool identity = false;

  std::size_t index(int e, int q) const { return static_cast<std::size_t>(e) * n_qp + q; }
  static TransformFields make_identity(const Discretization& disc);
};

struct TransformDerivatives {
  int n_qp = 0;
  std::vector<Mat2> d_dphi, dK, dA;
  std::vector<double> dJ;
  std::size_t index(int e, int q) const { return static_cast<std::size_t>(e) * n_qp + q; }
};

/// Values of a vector field at the interface nodes (topology node ids, ascending).
struct InterfaceTrace {
  std::vector<int> nodes;
  std::vector<Vec2> values;
};

std::vector<int> interface_nodes(const Discretization& disc);
InterfaceTrace zero_interface_trace(const Discretization& disc);
/// Restriction of a solid displacement to the interface nodes (exact for conforming spaces).
InterfaceTrace interface_trace(const Discretization& disc, const FEFunction& u);

/// Componentwise discrete Laplace lift of interface data into the fluid domain with zero data
/// on the exterior boundary. The Laplacian is factorized once.
class HarmonicExtension {
 public:
  explicit HarmonicExtension(const Discretization& disc);
  FEFunction extend(const InterfaceTrace& eta) const;

 private:
  const Discretization* disc_;
  ConstrainedSolver solver_;
  std::vector<int> exterior_;  // scalar fluid indices with zero data
};

FEFunction harmonic_extension(const Discretization& disc, const InterfaceTrace& eta);

/// Phi = id + phi, with phi stored separately so that a zero displacement yields identity
/// transform fields exactly.
struct FlowMap {
  FEFunction displacement;  // velocity space
  FEFunction positions(const Discretization& disc) const;
};

FlowMap flow_map(const Discretization& disc, const HarmonicExtension& ext, const FEFunction& u);
FlowMap flow_map(const Discretization& disc, const FEFunction& u);
FlowMap flow_map_from_extension(FEFunction phi);

/// Throws MeshTanglingError when J <= 0 and AdmissibilityError when min eig(A) falls below the
/// ellipticity floor (unless `check` is false).
TransformFields transform_fields(const Discretization& disc, const FlowMap& map, bool check = true);

TransformDerivatives transform_derivatives(const Discretization& disc, const TransformFields& fields,
                                           const FEFunction& d_phi);

/// Largest |row-wise divergence of K| over quadrature points, from the exact second derivatives
/// of the quadratic map on each element.
double max_cofactor_divergence(const Discretization& disc, const FlowMap& map);

/// CSV "element,min_J,min_eig_A" per fluid element.
void write_quality_csv(std::ostream& os, const Discretization& disc, const TransformFields& fields);

}  // namespace fsisens
