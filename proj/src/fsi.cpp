#include "fsisens/fsi.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

namespace fsisens {

void CouplingOptions::validate() const {
  if (!(omega > 0.0 && omega <= 1.0)) throw std::invalid_argument("relaxation omega must lie in (0, 1]");
  if (!(tol > 0.0)) throw std::invalid_argument("coupling tolerance must be positive");
  if (max_outer_iter < 1) throw std::invalid_argument("max_outer_iter must be at least 1");
  if (!(fluid.tol > 0.0)) throw std::invalid_argument("fluid tolerance must be positive");
  if (fluid.max_iter < 1) throw std::invalid_argument("fluid max_iter must be at least 1");
}

TractionTrace traction(const Discretization& disc, const FlowMap& map, const FEFunction& p, TractionMode mode) {
  const FESpace& v = disc.velocity();
  const auto& elems = v.elements;
  const std::array<std::array<double, 2>, 3> corner{{{0, 0}, {1, 0}, {0, 1}}};
  TractionTrace t = TractionTrace::zero(disc);
  for (std::size_t k = 0; k < t.edges.size(); ++k) {
    const auto& edge = disc.tagged_edges()[t.edges[k]];
    const int e = static_cast<int>(std::lower_bound(elems.begin(), elems.end(), edge.triangle) - elems.begin());
    const int k0 = edge.local_edge, k1 = (edge.local_edge + 1) % 3;
    for (int m = 0; m < 3; ++m) {
      const double s = 0.5 * m;  // a, mid, b
      const double xi = corner[k0][0] + s * (corner[k1][0] - corner[k0][0]);
      const double eta = corner[k0][1] + s * (corner[k1][1] - corner[k0][1]);
      const double pv = sample_scalar(disc.pressure(), p.coefficients, e, xi, eta);
      const Mat2 grad = sample_vector(disc, v, map.displacement.coefficients, e, xi, eta).gradient;
      Vec2 val = pv * (cofactor(Mat2::Identity() + grad) * edge.normal);
      if (mode == TractionMode::normal_projected) val = val.dot(edge.normal) * edge.normal;
      t.values[k][m] = val;
    }
  }
  return t;
}

FSIProblem::FSIProblem(const Discretization& disc, double nu, const Lame& lame)
    : disc_(&disc), fluid_(disc, nu), elasticity_(disc, lame), extension_(disc) {}

FSIState FSIProblem::evaluate(const FEFunction& u, const VelocityData& g, const CouplingOptions& opts,
                              const FluidState* warm) const {
  FSIState s;
  s.u = u;
  s.map = flow_map(*disc_, extension_, u);
  s.fields = transform_fields(*disc_, s.map);
  auto [fl, rep] = fluid_.solve(s.fields, {g, {}}, {}, opts.fluid, warm);
  s.fluid = std::move(fl);
  s.report = std::move(rep);
  return s;
}

FEFunction FSIProblem::structure_response(const FSIState& s, TractionMode mode) const {
  return elasticity_.solve(traction_load(*disc_, traction(*disc_, s.map, s.fluid.p, mode)));
}

FSIState FSIProblem::solve(const VelocityData& g, const CouplingOptions& opts, const FSIState* warm) const {
  opts.validate();
  const Discretization& disc = *disc_;
  FEFunction u = warm ? warm->u : FEFunction::zero(disc.displacement());
  FluidState fluid = warm ? warm->fluid : FluidState::zero(disc);
  std::vector<FSIIterate> log;
  SolverReport outer;
  int rising = 0;
  for (int k = 1; k <= opts.max_outer_iter; ++k) {
    FSIState s;
    try {
      s = evaluate(u, g, opts, opts.warm_start ? &fluid : nullptr);
    } catch (const MeshTanglingError& e) {
      throw FSIError(std::string("outer iteration ") + std::to_string(k) + ": " + e.what(), u, log, true);
    } catch (const AdmissibilityError& e) {
      throw FSIError(std::string("outer iteration ") + std::to_string(k) + ": " + e.what(), u, log, true);
    } catch (const DivergenceError& e) {
      throw FSIError(std::string("outer iteration ") + std::to_string(k) + ": " + e.what(), u, log, false);
    } catch (const SolverError& e) {
      throw FSIError(std::string("outer iteration ") + std::to_string(k) + ": " + e.what(), u, log, false);
    }
    fluid = s.fluid;
    const FEFunction n_t = structure_response(s, opts.traction);
    FEFunction next = u;
    next.coefficients = (1.0 - opts.omega) * u.coefficients + opts.omega * n_t.coefficients;
    FEFunction diff = next;
    diff.coefficients -= u.coefficients;
    const double nn = disc.h1_norm(next);
    const double inc = disc.h1_norm(diff);
    const double rel = nn > 0.0 ? inc / nn : inc;
    FSIIterate it;
    it.iter = k;
    it.du = rel;
    it.ratio = (!log.empty() && log.back().du > 0.0) ? rel / log.back().du : 0.0;
    it.fluid_iterations = s.report.iterations;
    it.min_J = s.fields.min_J;
    it.min_eig_A = s.fields.min_eig_A;
    if (k > 1) outer.increment_ratios.push_back(it.ratio);
    outer.increments.push_back(rel);
    outer.iterations = k;
    log.push_back(it);
    u = std::move(next);
    rising = it.ratio >= 1.0 ? rising + 1 : 0;
    if (!std::isfinite(rel)) throw FSIError("outer iterate is not finite", u, log, false);
    if (rel <= opts.tol) {
      outer.converged = true;
      break;
    }
    if (rising >= 5)
      throw FSIError("outer iteration diverges: increment ratio >= 1 for 5 consecutive iterations", u, log, false);
  }
  if (!outer.converged)
    throw FSIError("outer iteration did not converge in " + std::to_string(opts.max_outer_iter) + " iterations",
                   u, log, false);
  FSIState final_state;
  try {
    final_state = evaluate(u, g, opts, opts.warm_start ? &fluid : nullptr);
  } catch (const std::runtime_error& e) {
    throw FSIError(std::string("final fluid solve: ") + e.what(), u, log, false);
  }
  final_state.log = std::move(log);
  outer.residual_history.push_back(residual(final_state, g, opts.traction));
  final_state.report = std::move(outer);
  return final_state;
}

double FSIProblem::residual(const FSIState& s, const VelocityData& g, TractionMode mode) const {
  const double rf = fluid_.residual(s.fields, s.fluid, {g, {}}, {});
  const Vector load = traction_load(*disc_, traction(*disc_, s.map, s.fluid.p, mode));
  const double rs = elasticity_.residual(s.u, load);
  FEFunction d = elasticity_.solve(load);
  d.coefficients -= s.u.coefficients;
  return rf + rs + disc_->h1_norm(d);
}

FSIState solve_fsi(const Discretization& disc, const VelocityData& g, const Lame& lame, double nu,
                   const CouplingOptions& opts) {
  return FSIProblem(disc, nu, lame).solve(g, opts);
}

double fsi_residual(const FSIProblem& problem, const FSIState& state, const VelocityData& g, TractionMode mode) {
  return problem.residual(state, g, mode);
}

void write_fsi_log_csv(std::ostream& os, const std::vector<FSIIterate>& log) {
  os << "iter,du,ratio,fluid_iterations,min_J,min_eig_A\n" << std::setprecision(17);
  for (const auto& it : log)
    os << it.iter << ',' << it.du << ',' << it.ratio << ',' << it.fluid_iterations << ',' << it.min_J << ','
       << it.min_eig_A << '\n';
}

}  // namespace fsisens
