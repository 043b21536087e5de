#pragma once

#include <functional>

#include "fsisens/fem.hpp"
#include "fsisens/geomap.hpp"
#include "fsisens/linalg.hpp"

namespace fsisens {

/// Volume data f, divergence data f2 and outflow data f3. Empty callables mean zero.
struct FluidData {
  std::function<Vec2(const Point&)> f;
  std::function<double(const Point&)> f2;
  std::function<Vec2(const Point&)> f3;
};

struct Lame {
  double lambda = 75.0;
  double mu = 50.0;
};

/// Monolithic fluid numbering: velocity dofs, then pressure dofs offset by the velocity count.
inline int pressure_offset(const Discretization& disc) { return disc.velocity().n_dofs(); }
inline int fluid_size(const Discretization& disc) {
  return disc.velocity().n_dofs() + disc.pressure().n_dofs();
}

/// nu (grad psi)^T A (grad w) + psi . (b^T K grad) w + psi . (w^T K grad) c - p (K grad).psi
/// + q (K grad)^T w, with b = `advector` and c = `reaction_with` when given. No outflow surface
/// term is assembled: the do-nothing condition is the natural one of this form.
SparseSaddleSystem assemble_transformed_oseen(const Discretization& disc, const TransformFields& a_field,
                                              const TransformFields& k_field, const FEFunction* advector,
                                              const FEFunction* reaction_with, double nu);

/// Untransformed Stokes operator, coded without coefficient fields.
SparseSaddleSystem assemble_stokes(const Discretization& disc, double nu);

/// Isotropic elasticity 2 mu eps(u):eps(v) + lambda div u div v on the solid.
SparseMatrix assemble_elasticity(const Discretization& disc, const Lame& lame);

/// Fluid load vector in monolithic numbering.
Vector assemble_rhs(const Discretization& disc, const FluidData& data);

/// Contribution of a quadrature point to a fluid residual: the velocity test function psi = N e_i
/// receives G.row(i) . grad N + s_i N, the pressure test function q receives c q.
struct FluxPoint {
  Mat2 G = Mat2::Zero();
  Vec2 s = Vec2::Zero();
  double c = 0.0;
};

/// Integrates a pointwise flux over the fluid elements. The callback receives the velocity-space
/// element index and the quadrature point index.
Vector integrate_fluid_flux(const Discretization& disc, const std::function<FluxPoint(int, int)>& flux);

/// Weak operator of the transformed Navier-Stokes system applied to (w, p), without data.
Vector navier_stokes_action(const Discretization& disc, const TransformFields& fields, const FEFunction& w,
                            const FEFunction& p, double nu);

/// Right-hand side of the constant-coefficient Picard step: coefficient perturbations and the
/// transformed convection lagged at (w_bar, p_bar), with a negative sign.
Vector picard_rhs(const Discretization& disc, const TransformFields& fields, const FEFunction& w_bar,
                  const FEFunction& p_bar, double nu);

/// Derivative of the transformed operator at (w_hat, p_hat) with respect to the flow map along
/// the transform derivatives `d`.
Vector shape_derivative_action(const Discretization& disc, const TransformFields& fields,
                               const TransformDerivatives& d, const FEFunction& w_hat,
                               const FEFunction& p_hat, double nu);

/// Right-hand side of one constant-coefficient step of the linearized iteration, lagged at
/// (z_w, z_p), with a negative sign.
Vector oseen_perturbation_rhs(const Discretization& disc, const TransformFields& fields,
                              const FEFunction& w_hat, const FEFunction& z_w, const FEFunction& z_p,
                              double nu);

/// Identity-coefficient Oseen operator linearized at w_hat (convection and reaction terms).
SparseSaddleSystem assemble_oseen_identity(const Discretization& disc, const FEFunction& w_hat, double nu);

}  // namespace fsisens
