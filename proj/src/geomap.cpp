#include "fsisens/geomap.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace fsisens {

PointTransform transform_at(const Mat2& grad_phi) {
  PointTransform t;
  t.dphi = Mat2::Identity() + grad_phi;
  t.J = t.dphi.determinant();
  t.K = cofactor(t.dphi);
  t.A = t.K.transpose() * t.K / t.J;
  return t;
}

PointDerivative transform_derivative_at(const PointTransform& base, const Mat2& grad_dphi) {
  PointDerivative d;
  d.d_dphi = grad_dphi;
  d.dJ = base.J * (base.dphi.inverse() * grad_dphi).trace();
  d.dK = cofactor(grad_dphi);
  const Mat2 ktk = base.K.transpose() * base.K;
  d.dA = -d.dJ / (base.J * base.J) * ktk +
         (d.dK.transpose() * base.K + base.K.transpose() * d.dK) / base.J;
  return d;
}

TransformFields TransformFields::make_identity(const Discretization& disc) {
  TransformFields f;
  f.n_elements = static_cast<int>(disc.velocity().elements.size());
  f.n_qp = static_cast<int>(triangle_rule().size());
  const std::size_t n = static_cast<std::size_t>(f.n_elements) * f.n_qp;
  f.dphi.assign(n, Mat2::Identity());
  f.K.assign(n, Mat2::Identity());
  f.A.assign(n, Mat2::Identity());
  f.J.assign(n, 1.0);
  f.identity = true;
  return f;
}

std::vector<int> interface_nodes(const Discretization& disc) {
  std::vector<int> nodes;
  for (const auto& e : disc.tagged_edges())
    if (e.tag == BoundaryTag::interface) nodes.insert(nodes.end(), {e.a, e.b, e.mid});
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

InterfaceTrace zero_interface_trace(const Discretization& disc) {
  InterfaceTrace t;
  t.nodes = interface_nodes(disc);
  t.values.assign(t.nodes.size(), Vec2::Zero());
  return t;
}

HarmonicExtension::HarmonicExtension(const Discretization& disc) : disc_(&disc) {
  const FESpace& s = disc.space(spaces::fluid_scalar);
  std::vector<int> constrained;
  for (auto tag : {BoundaryTag::inflow, BoundaryTag::wall, BoundaryTag::outflow, BoundaryTag::interface}) {
    if (!disc.has_tag(tag)) continue;
    const auto dofs = boundary_dofs(disc, spaces::fluid_scalar, tag);
    constrained.insert(constrained.end(), dofs.begin(), dofs.end());
    if (tag != BoundaryTag::interface) exterior_.insert(exterior_.end(), dofs.begin(), dofs.end());
  }
  if (s.n_scalar() > 0) solver_ = ConstrainedSolver(disc.stiffness(spaces::fluid_scalar), constrained);
}

FEFunction HarmonicExtension::extend(const InterfaceTrace& eta) const {
  const FESpace& s = disc_->space(spaces::fluid_scalar);
  const FESpace& v = disc_->velocity();
  FEFunction phi = FEFunction::zero(v);
  if (eta.nodes.empty()) return phi;
  const Vector zero = Vector::Zero(s.n_scalar());
  for (int c = 0; c < 2; ++c) {
    Vector values = Vector::Zero(s.n_scalar());
    bool any = false;
    for (std::size_t k = 0; k < eta.nodes.size(); ++k) {
      const int i = s.scalar_of_global[eta.nodes[k]];
      if (i < 0) throw DofError("interface trace node outside the fluid domain");
      values[i] = eta.values[k][c];
      any = any || eta.values[k][c] != 0.0;
    }
    for (int i : exterior_) values[i] = 0.0;
    if (!any) continue;
    phi.coefficients.segment(c * s.n_scalar(), s.n_scalar()) = solver_.solve(zero, values);
  }
  return phi;
}

FEFunction harmonic_extension(const Discretization& disc, const InterfaceTrace& eta) {
  return HarmonicExtension(disc).extend(eta);
}

FEFunction FlowMap::positions(const Discretization& disc) const {
  const FESpace& v = disc.velocity();
  FEFunction x = displacement;
  for (int i = 0; i < v.n_scalar(); ++i) {
    x.coefficients[v.dof(i, 0)] += v.points[i].x;
    x.coefficients[v.dof(i, 1)] += v.points[i].y;
  }
  return x;
}

InterfaceTrace interface_trace(const Discretization& disc, const FEFunction& u) {
  const FESpace& s = disc.displacement();
  InterfaceTrace t;
  t.nodes = interface_nodes(disc);
  t.values.reserve(t.nodes.size());
  for (int node : t.nodes) {
    const int i = s.scalar_of_global[node];
    t.values.emplace_back(u.coefficients[s.dof(i, 0)], u.coefficients[s.dof(i, 1)]);
  }
  return t;
}

FlowMap flow_map(const Discretization& disc, const HarmonicExtension& ext, const FEFunction& u) {
  if (!(u.space == spaces::displacement))
    throw DofError("flow_map expects a displacement on the solid space");
  return FlowMap{ext.extend(interface_trace(disc, u))};
}

FlowMap flow_map(const Discretization& disc, const FEFunction& u) {
  return flow_map(disc, HarmonicExtension(disc), u);
}

FlowMap flow_map_from_extension(FEFunction phi) { return FlowMap{std::move(phi)}; }

TransformFields transform_fields(const Discretization& disc, const FlowMap& map, bool check) {
  const FESpace& v = disc.velocity();
  const auto& rule = triangle_rule();
  TransformFields f;
  f.n_elements = static_cast<int>(v.elements.size());
  f.n_qp = static_cast<int>(rule.size());
  const std::size_t n = static_cast<std::size_t>(f.n_elements) * f.n_qp;
  f.dphi.resize(n);
  f.K.resize(n);
  f.A.resize(n);
  f.J.resize(n);
  const Vector& c = map.displacement.coefficients;
  f.identity = c.isZero(0.0);
  parallel_for(f.n_elements, [&](int e) {
    for (int q = 0; q < f.n_qp; ++q) {
      const auto [xi, eta] = rule.points[q];
      const Mat2 grad = sample_vector(disc, v, c, e, xi, eta).gradient;
      const auto t = transform_at(grad);
      const auto k = f.index(e, q);
      f.dphi[k] = t.dphi;
      f.J[k] = t.J;
      f.K[k] = t.K;
      f.A[k] = t.A;
    }
  });
  f.min_J = f.J.empty() ? 1.0 : 1e300;
  f.min_eig_A = f.J.empty() ? 1.0 : 1e300;
  int worst_j = -1;
  for (int e = 0; e < f.n_elements; ++e)
    for (int q = 0; q < f.n_qp; ++q) {
      const auto k = f.index(e, q);
      if (f.J[k] < f.min_J) {
        f.min_J = f.J[k];
        worst_j = v.elements[e];
      }
      const double eig = f.J[k] > 0.0 ? min_eigenvalue_sym(f.A[k]) : -1.0;
      if (eig < f.min_eig_A) {
        f.min_eig_A = eig;
        f.worst_element = v.elements[e];
      }
    }
  if (check) {
    if (!(f.min_J > 0.0)) throw MeshTanglingError(worst_j, f.min_J);
    if (f.min_eig_A < ellipticity_floor) throw AdmissibilityError(f.worst_element, f.min_eig_A);
  }
  return f;
}

TransformDerivatives transform_derivatives(const Discretization& disc, const TransformFields& fields,
                                           const FEFunction& d_phi) {
  const FESpace& v = disc.velocity();
  const auto& rule = triangle_rule();
  TransformDerivatives d;
  d.n_qp = fields.n_qp;
  const std::size_t n = static_cast<std::size_t>(fields.n_elements) * fields.n_qp;
  d.d_dphi.resize(n);
  d.dK.resize(n);
  d.dA.resize(n);
  d.dJ.resize(n);
  parallel_for(fields.n_elements, [&](int e) {
    for (int q = 0; q < fields.n_qp; ++q) {
      const auto [xi, eta] = rule.points[q];
      const Mat2 grad = sample_vector(disc, v, d_phi.coefficients, e, xi, eta).gradient;
      const auto k = fields.index(e, q);
      const PointTransform base{fields.dphi[k], fields.J[k], fields.K[k], fields.A[k]};
      const auto pd = transform_derivative_at(base, grad);
      d.d_dphi[k] = pd.d_dphi;
      d.dJ[k] = pd.dJ;
      d.dK[k] = pd.dK;
      d.dA[k] = pd.dA;
    }
  });
  return d;
}

double max_cofactor_divergence(const Discretization& disc, const FlowMap& map) {
  const FESpace& v = disc.velocity();
  const auto& rule = triangle_rule();
  const auto& ref_hess = basis::p2_hessians();
  double worst = 0.0;
  for (int e = 0; e < static_cast<int>(v.elements.size()); ++e) {
    const auto& g = disc.geometry(v.elements[e]);
    // physical Hessians of each displacement component (constant on the element)
    std::array<Mat2, 2> hess{Mat2::Zero(), Mat2::Zero()};
    for (int a = 0; a < 6; ++a) {
      const Mat2 h = g.inv_jacobian_t * ref_hess[a] * g.inv_jacobian_t.transpose();
      for (int c = 0; c < 2; ++c) hess[c] += map.displacement.coefficients[v.dof(v.cell_nodes[e][a], c)] * h;
    }
    for (std::size_t q = 0; q < rule.size(); ++q) {
      // d/dx_k DPhi_{mn} = d_k d_n phi_m; the cofactor is linear, so d_k K = cof(d_k DPhi)
      Vec2 div = Vec2::Zero();
      for (int k = 0; k < 2; ++k) {
        Mat2 d_dphi;
        for (int m = 0; m < 2; ++m)
          for (int n = 0; n < 2; ++n) d_dphi(m, n) = hess[m](n, k);
        const Mat2 dk = cofactor(d_dphi);
        for (int i = 0; i < 2; ++i) div[i] += dk(i, k);
      }
      worst = std::max(worst, div.cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

void write_quality_csv(std::ostream& os, const Discretization& disc, const TransformFields& fields) {
  const FESpace& v = disc.velocity();
  os << "element,min_J,min_eig_A\n" << std::setprecision(17);
  for (int e = 0; e < fields.n_elements; ++e) {
    double mj = 1e300, me = 1e300;
    for (int q = 0; q < fields.n_qp; ++q) {
      const auto k = fields.index(e, q);
      mj = std::min(mj, fields.J[k]);
      me = std::min(me, min_eigenvalue_sym(fields.A[k]));
    }
    os << v.elements[e] << ',' << mj << ',' << me << '\n';
  }
}

}  // namespace fsisens
