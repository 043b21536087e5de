#include "fsisens/forms.hpp"

namespace fsisens {

namespace {

// Local fluid dofs: 6 nodes x 2 velocity components, then 3 pressure nodes.
constexpr int kLocalFluid = 15;

std::vector<int> fluid_local_dofs(const Discretization& disc, int e) {
  const FESpace& v = disc.velocity();
  const FESpace& p = disc.pressure();
  const int off = pressure_offset(disc);
  std::vector<int> d(kLocalFluid);
  for (int c = 0; c < 2; ++c)
    for (int a = 0; a < 6; ++a) d[c * 6 + a] = v.dof(v.cell_nodes[e][a], c);
  for (int b = 0; b < 3; ++b) d[12 + b] = off + p.cell_nodes[e][b];
  return d;
}

void check_positive_jacobian(const Discretization& disc, const TransformFields& f) {
  if (f.identity) return;
  for (int e = 0; e < f.n_elements; ++e)
    for (int q = 0; q < f.n_qp; ++q) {
      const double j = f.J[f.index(e, q)];
      if (!(j > 0.0)) throw MeshTanglingError(disc.velocity().elements[e], j);
    }
}

SparseSaddleSystem finish_fluid(const Discretization& disc, SparseMatrix k) {
  const int nv = pressure_offset(disc);
  auto sys = split_blocks(k, Vector::Zero(k.rows()), nv);
  sys.pressure_determined = disc.has_tag(BoundaryTag::outflow);
  return sys;
}

}  // namespace

SparseSaddleSystem assemble_transformed_oseen(const Discretization& disc, const TransformFields& a_field,
                                              const TransformFields& k_field, const FEFunction* advector,
                                              const FEFunction* reaction_with, double nu) {
  check_positive_jacobian(disc, a_field);
  check_positive_jacobian(disc, k_field);
  const FESpace& v = disc.velocity();
  const auto& rule = triangle_rule();
  const int n = fluid_size(disc);
  const int n_el = static_cast<int>(v.elements.size());
  if (a_field.n_elements != n_el || k_field.n_elements != n_el)
    throw DofError("coefficient fields do not match the fluid mesh");
  auto k = assemble_matrix(n, n, n_el, [&](int e, LocalMatrix& lm) {
    lm.rows = fluid_local_dofs(disc, e);
    lm.cols = lm.rows;
    lm.values = Eigen::MatrixXd::Zero(kLocalFluid, kLocalFluid);
    const auto& g = disc.geometry(v.elements[e]);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto [xi, eta] = rule.points[q];
      const double w = g.area * rule.weights[q];
      const auto idx = a_field.index(e, static_cast<int>(q));
      const Mat2& A = a_field.A[idx];
      const Mat2& K = k_field.K[idx];
      const auto N = basis::p2_values(xi, eta);
      const auto dN = p2_physical_gradients(g, xi, eta);
      const auto M = basis::p1_values(xi, eta);
      Vec2 kt_b = Vec2::Zero();
      if (advector) kt_b = K.transpose() * sample_vector(disc, v, advector->coefficients, e, xi, eta).value;
      Mat2 react = Mat2::Zero();  // (i, j) -> (K grad w_hat_i)_j
      if (reaction_with)
        react = sample_vector(disc, v, reaction_with->coefficients, e, xi, eta).gradient * K.transpose();
      std::array<Vec2, 6> kdn;
      for (int a = 0; a < 6; ++a) kdn[a] = K * dN[a];
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) {
          const double diag = nu * dN[a].dot(A * dN[b]) + N[a] * kt_b.dot(dN[b]);
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
              double val = (i == j) ? diag : 0.0;
              val += N[a] * N[b] * react(i, j);
              lm.values(i * 6 + a, j * 6 + b) += w * val;
            }
        }
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 3; ++b)
          for (int i = 0; i < 2; ++i) {
            lm.values(i * 6 + a, 12 + b) -= w * M[b] * kdn[a][i];
            lm.values(12 + b, i * 6 + a) += w * M[b] * kdn[a][i];
          }
    }
  });
  return finish_fluid(disc, std::move(k));
}

SparseSaddleSystem assemble_stokes(const Discretization& disc, double nu) {
  const FESpace& v = disc.velocity();
  const auto& rule = triangle_rule();
  const int n = fluid_size(disc);
  auto k = assemble_matrix(n, n, static_cast<int>(v.elements.size()), [&](int e, LocalMatrix& lm) {
    lm.rows = fluid_local_dofs(disc, e);
    lm.cols = lm.rows;
    lm.values = Eigen::MatrixXd::Zero(kLocalFluid, kLocalFluid);
    const auto& g = disc.geometry(v.elements[e]);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto [xi, eta] = rule.points[q];
      const double w = g.area * rule.weights[q];
      const auto dN = p2_physical_gradients(g, xi, eta);
      const auto M = basis::p1_values(xi, eta);
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
          const double s = w * nu * dN[a].dot(dN[b]);
          lm.values(a, b) += s;
          lm.values(6 + a, 6 + b) += s;
        }
        for (int b = 0; b < 3; ++b)
          for (int i = 0; i < 2; ++i) {
            lm.values(i * 6 + a, 12 + b) -= w * M[b] * dN[a][i];
            lm.values(12 + b, i * 6 + a) += w * M[b] * dN[a][i];
          }
      }
    }
  });
  return finish_fluid(disc, std::move(k));
}

SparseSaddleSystem assemble_oseen_identity(const Discretization& disc, const FEFunction& w_hat, double nu) {
  const auto id = TransformFields::make_identity(disc);
  return assemble_transformed_oseen(disc, id, id, &w_hat, &w_hat, nu);
}

SparseMatrix assemble_elasticity(const Discretization& disc, const Lame& lame) {
  const FESpace& s = disc.displacement();
  const auto& rule = triangle_rule();
  const int n = s.n_dofs();
  return assemble_matrix(n, n, static_cast<int>(s.elements.size()), [&](int e, LocalMatrix& lm) {
    lm.rows.resize(12);
    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < 6; ++a) lm.rows[c * 6 + a] = s.dof(s.cell_nodes[e][a], c);
    lm.cols = lm.rows;
    lm.values = Eigen::MatrixXd::Zero(12, 12);
    const auto& g = disc.geometry(s.elements[e]);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto [xi, eta] = rule.points[q];
      const double w = g.area * rule.weights[q];
      const auto dN = p2_physical_gradients(g, xi, eta);
      for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) {
          const double lap = dN[a].dot(dN[b]);
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
              double val = lame.mu * ((i == j ? lap : 0.0) + dN[a][j] * dN[b][i]) +
                           lame.lambda * dN[a][i] * dN[b][j];
              lm.values(i * 6 + a, j * 6 + b) += w * val;
            }
        }
    }
  });
}

Vector assemble_rhs(const Discretization& disc, const FluidData& data) {
  const FESpace& v = disc.velocity();
  const auto& rule = triangle_rule();
  const int n = fluid_size(disc);
  Vector rhs = Vector::Zero(n);
  if (data.f || data.f2) {
    rhs += assemble_vector(n, static_cast<int>(v.elements.size()), [&](int e, LocalVector& lv) {
      lv.rows = fluid_local_dofs(disc, e);
      lv.values = Eigen::VectorXd::Zero(kLocalFluid);
      const auto& g = disc.geometry(v.elements[e]);
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto [xi, eta] = rule.points[q];
        const double w = g.area * rule.weights[q];
        const Point x = g.map(xi, eta);
        if (data.f) {
          const Vec2 f = data.f(x);
          const auto N = basis::p2_values(xi, eta);
          for (int a = 0; a < 6; ++a)
            for (int i = 0; i < 2; ++i) lv.values[i * 6 + a] += w * f[i] * N[a];
        }
        if (data.f2) {
          const double f2 = data.f2(x);
          const auto M = basis::p1_values(xi, eta);
          for (int b = 0; b < 3; ++b) lv.values[12 + b] += w * f2 * M[b];
        }
      }
    });
  }
  if (data.f3) {
    const auto& er = edge_rule();
    const auto& pts = disc.topology().points;
    for (const auto& edge : disc.tagged_edges()) {
      if (edge.tag != BoundaryTag::outflow) continue;
      const std::array<int, 3> nodes{edge.a, edge.mid, edge.b};
      for (std::size_t q = 0; q < er.size(); ++q) {
        const double t = er.points[q][0];
        const double w = edge.length * er.weights[q];
        const std::array<double, 3> L{(1 - t) * (1 - 2 * t), 4 * t * (1 - t), t * (2 * t - 1)};
        const Point x{pts[edge.a].x + t * (pts[edge.b].x - pts[edge.a].x),
                      pts[edge.a].y + t * (pts[edge.b].y - pts[edge.a].y)};
        const Vec2 f3 = data.f3(x);
        for (int k = 0; k < 3; ++k) {
          const int i = v.scalar_of_global[nodes[k]];
          for (int c = 0; c < 2; ++c) rhs[v.dof(i, c)] += w * f3[c] * L[k];
        }
      }
    }
  }
  return rhs;
}

Vector integrate_fluid_flux(const Discretization& disc, const std::function<FluxPoint(int, int)>& flux) {
  const FESpace& v = disc.velocity();
  const auto& rule = triangle_rule();
  return assemble_vector(fluid_size(disc), static_cast<int>(v.elements.size()), [&](int e, LocalVector& lv) {
    lv.rows = fluid_local_dofs(disc, e);
    lv.values = Eigen::VectorXd::Zero(kLocalFluid);
    const auto& g = disc.geometry(v.elements[e]);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto [xi, eta] = rule.points[q];
      const double w = g.area * rule.weights[q];
      const FluxPoint fp = flux(e, static_cast<int>(q));
      const auto N = basis::p2_values(xi, eta);
      const auto dN = p2_physical_gradients(g, xi, eta);
      const auto M = basis::p1_values(xi, eta);
      for (int a = 0; a < 6; ++a)
        for (int i = 0; i < 2; ++i)
          lv.values[i * 6 + a] += w * (fp.G.row(i).dot(dN[a]) + fp.s[i] * N[a]);
      for (int b = 0; b < 3; ++b) lv.values[12 + b] += w * fp.c * M[b];
    }
  });
}

namespace {

struct Sampler {
  const Discretization& disc;
  VectorSample vec(const FEFunction& f, int e, int q) const {
    const auto [xi, eta] = triangle_rule().points[q];
    return sample_vector(disc, disc.velocity(), f.coefficients, e, xi, eta);
  }
  double scalar(const FEFunction& f, int e, int q) const {
    const auto [xi, eta] = triangle_rule().points[q];
    return sample_scalar(disc.pressure(), f.coefficients, e, xi, eta);
  }
};

double contract(const Mat2& k, const Mat2& grad) { return k.cwiseProduct(grad).sum(); }

}  // namespace

Vector navier_stokes_action(const Discretization& disc, const TransformFields& fields, const FEFunction& w,
                            const FEFunction& p, double nu) {
  const Sampler s{disc};
  return integrate_fluid_flux(disc, [&](int e, int q) {
    const auto k = fields.index(e, q);
    const Mat2& A = fields.A[k];
    const Mat2& K = fields.K[k];
    const auto ws = s.vec(w, e, q);
    const double ps = s.scalar(p, e, q);
    FluxPoint fp;
    fp.G = nu * ws.gradient * A.transpose() - ps * K;
    fp.s = ws.gradient * K.transpose() * ws.value;
    fp.c = contract(K, ws.gradient);
    return fp;
  });
}

Vector picard_rhs(const Discretization& disc, const TransformFields& fields, const FEFunction& w_bar,
                  const FEFunction& p_bar, double nu) {
  const Sampler s{disc};
  const Mat2 I = Mat2::Identity();
  return integrate_fluid_flux(disc, [&](int e, int q) {
    const auto k = fields.index(e, q);
    const Mat2 dA = fields.A[k] - I;
    const Mat2 dK = fields.K[k] - I;
    const auto ws = s.vec(w_bar, e, q);
    const double ps = s.scalar(p_bar, e, q);
    FluxPoint fp;
    fp.G = -(nu * ws.gradient * dA.transpose() - ps * dK);
    fp.s = -(ws.gradient * fields.K[k].transpose() * ws.value);
    fp.c = -contract(dK, ws.gradient);
    return fp;
  });
}

Vector shape_derivative_action(const Discretization& disc, const TransformFields& fields,
                               const TransformDerivatives& d, const FEFunction& w_hat,
                               const FEFunction& p_hat, double nu) {
  const Sampler s{disc};
  return integrate_fluid_flux(disc, [&](int e, int q) {
    const auto k = fields.index(e, q);
    const Mat2& dA = d.dA[k];
    const Mat2& dK = d.dK[k];
    const auto ws = s.vec(w_hat, e, q);
    const double ps = s.scalar(p_hat, e, q);
    FluxPoint fp;
    fp.G = nu * ws.gradient * dA.transpose() - ps * dK;
    fp.s = ws.gradient * dK.transpose() * ws.value;
    fp.c = contract(dK, ws.gradient);
    return fp;
  });
}

Vector oseen_perturbation_rhs(const Discretization& disc, const TransformFields& fields,
                              const FEFunction& w_hat, const FEFunction& z_w, const FEFunction& z_p,
                              double nu) {
  const Sampler s{disc};
  const Mat2 I = Mat2::Identity();
  return integrate_fluid_flux(disc, [&](int e, int q) {
    const auto k = fields.index(e, q);
    const Mat2 dA = fields.A[k] - I;
    const Mat2 dK = fields.K[k] - I;
    const auto wh = s.vec(w_hat, e, q);
    const auto zs = s.vec(z_w, e, q);
    const double ps = s.scalar(z_p, e, q);
    FluxPoint fp;
    fp.G = -(nu * zs.gradient * dA.transpose() - ps * dK);
    fp.s = -(zs.gradient * dK.transpose() * wh.value + wh.gradient * dK.transpose() * zs.value);
    fp.c = -contract(dK, zs.gradient);
    return fp;
  });
}

}  // namespace fsisens
