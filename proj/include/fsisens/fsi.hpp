#pragma once

#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "fsisens/elasticity.hpp"
#include "fsisens/fluid.hpp"
#include "fsisens/geomap.hpp"

namespace fsisens {

struct CouplingOptions {
  double omega = 1.0;  // relaxation; 1 is the plain fixed point
  double tol = 1e-9;   // relative H1 displacement increment
  int max_outer_iter = 100;
  TractionMode traction = TractionMode::full_vector;
  bool warm_start = true;  // reuse the previous fluid state inside the outer loop
  PicardOptions fluid{};

  /// Throws std::invalid_argument naming the violated invariant.
  void validate() const;
};

struct FSIIterate {
  int iter = 0;
  double du = 0.0;  // relative H1 increment
  double ratio = 0.0;
  int fluid_iterations = 0;
  double min_J = 1.0;
  double min_eig_A = 1.0;
};

struct FSIState {
  FEFunction u;
  FlowMap map;
  TransformFields fields;
  FluidState fluid;
  SolverReport report;
  std::vector<FSIIterate> log;
};

/// Outer-loop failure; carries the offending iterate and the iteration log.
class FSIError : public std::runtime_error {
 public:
  FSIError(const std::string& what, FEFunction last_u, std::vector<FSIIterate> log, bool tangled)
      : std::runtime_error(what), last_u_(std::move(last_u)), log_(std::move(log)), tangled_(tangled) {}
  const FEFunction& last_u() const { return last_u_; }
  const std::vector<FSIIterate>& log() const { return log_; }
  bool tangled() const { return tangled_; }

 private:
  FEFunction last_u_;
  std::vector<FSIIterate> log_;
  bool tangled_;
};

/// Pressure traction p K n at the three nodes of every interface edge, with n the fluid outward
/// normal and K taken from the owning fluid element.
TractionTrace traction(const Discretization& disc, const FlowMap& map, const FEFunction& p,
                       TractionMode mode = TractionMode::full_vector);

/// Partitioned coupling: fluid solve on the current flow map, traction, elasticity solve, relaxed
/// displacement update. Owns the factorizations shared by all solves on one discretization.
class FSIProblem {
 public:
  FSIProblem(const Discretization& disc, double nu, const Lame& lame);

  FSIState solve(const VelocityData& g, const CouplingOptions& opts, const FSIState* warm = nullptr) const;
  /// Fluid state and coefficient fields at a prescribed displacement.
  FSIState evaluate(const FEFunction& u, const VelocityData& g, const CouplingOptions& opts,
                    const FluidState* warm = nullptr) const;
  /// Structure response N(t(u, p)) of a state.
  FEFunction structure_response(const FSIState& s, TractionMode mode) const;
  /// Fluid residual + elasticity residual with the state's traction + H1 norm of u - N t(u, p).
  double residual(const FSIState& s, const VelocityData& g, TractionMode mode) const;

  const Discretization& disc() const { return *disc_; }
  const FluidSolver& fluid() const { return fluid_; }
  const ElasticitySolver& elasticity() const { return elasticity_; }
  const HarmonicExtension& extension() const { return extension_; }
  double nu() const { return fluid_.nu(); }

 private:
  const Discretization* disc_;
  FluidSolver fluid_;
  ElasticitySolver elasticity_;
  HarmonicExtension extension_;
};

FSIState solve_fsi(const Discretization& disc, const VelocityData& g, const Lame& lame, double nu,
                   const CouplingOptions& opts = {});
double fsi_residual(const FSIProblem& problem, const FSIState& state, const VelocityData& g,
                    TractionMode mode = TractionMode::full_vector);

/// CSV "iter,du,ratio,fluid_iterations,min_J,min_eig_A".
void write_fsi_log_csv(std::ostream& os, const std::vector<FSIIterate>& log);

}  // namespace fsisens
