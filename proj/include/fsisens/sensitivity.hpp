#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fsisens/fsi.hpp"

namespace fsisens {

struct SensitivityOptions {
  double tol = 1e-10;
  int max_iter = 200;
};

struct SensitivityState {
  FEFunction du;       // solid displacement derivative
  FluidState dfluid;   // (dw, dp)
  SolverReport report;
};

/// Derivative of the control-to-state map at a converged coupled state. The linearized fluid
/// operator is factorized once at construction.
class SensitivitySolver {
 public:
  SensitivitySolver(const FSIProblem& problem, const FSIState& base, TractionMode mode);

  /// Inflow derivative at a fixed displacement.
  FluidState linearized_wrt_g(const VelocityData& dg) const;
  /// Displacement derivative at fixed inflow data.
  FluidState linearized_wrt_u(const FEFunction& du) const;
  /// Both contributions with one solve (the system is linear in the data).
  FluidState linearized(const VelocityData& dg, const FEFunction& du) const;

  /// Derivative of the interface traction: dp K n + p_hat cof(grad dphi) n.
  TractionTrace traction_derivative(const FEFunction& dp, const FEFunction& dphi) const;
  /// The map du -> S^{-1} L(traction derivative) of the displacement linearization.
  FEFunction coupling_map(const FEFunction& du) const;

  /// Fixed point du = coupling(du) + inflow response, then the final linearized fluid solve.
  SensitivityState solve(const VelocityData& dg, const SensitivityOptions& opts = {}) const;
  /// Oracle: one sparse solve of the coupled linear system, with the flow-map derivative of the
  /// fluid operator assembled element by element.
  SensitivityState solve_monolithic(const VelocityData& dg) const;

  /// Dense matrix of coupling_map on the displacement dofs (zero columns off the interface).
  Eigen::MatrixXd coupling_matrix() const;
  /// Constant-coefficient iteration report for the inflow linearization.
  SolverReport t_iteration_report(const VelocityData& dg, const PicardOptions& opts) const;
  /// Direct-mode linearized solution matching t_iteration_report's problem.
  std::pair<FluidState, FluidState> t_iteration_vs_direct(const VelocityData& dg, const PicardOptions& opts,
                                                          SolverReport* report) const;

  const FSIState& base() const { return *base_; }
  const FSIProblem& problem() const { return *problem_; }

 private:
  FEFunction extend(const FEFunction& du) const;

  const FSIProblem* problem_;
  const FSIState* base_;
  TractionMode mode_;
  LinearizedSolver linear_;
};

struct TaylorRow {
  double h = 0.0;
  double r_u = 0.0, r_w = 0.0, r_p = 0.0;
  bool valid = false;
};

struct TaylorReport {
  std::vector<TaylorRow> rows;
  double slope_u = 0.0, slope_w = 0.0, slope_p = 0.0;
  double derivative_norm_u = 0.0, derivative_norm_w = 0.0, derivative_norm_p = 0.0;
  int valid_rows() const;
  bool passed(double min_slope) const;
};

/// Remainders |Pi(g + h dg) - Pi(g) - h Pi'(g) dg| for each h (H1 for u and w, L2 for p) and
/// fitted log-log slopes. Requires at least three valid rows for the slopes.
TaylorReport taylor_test(const FSIProblem& problem, const VelocityData& g, const VelocityData& dg,
                         const std::vector<double>& hs, const CouplingOptions& opts,
                         const SensitivityOptions& sopts = {});

/// Remainder slopes for the linearized fluid solve alone, in the inflow direction (u fixed) or
/// the displacement direction (g fixed).
struct FluidTaylorReport {
  std::vector<double> h, r;
  double slope = 0.0;
};
FluidTaylorReport fluid_taylor_inflow(const FSIProblem& problem, const FSIState& base, const VelocityData& g,
                                      const VelocityData& dg, const std::vector<double>& hs,
                                      const CouplingOptions& opts);
FluidTaylorReport fluid_taylor_displacement(const FSIProblem& problem, const FSIState& base,
                                            const VelocityData& g, const FEFunction& du,
                                            const std::vector<double>& hs, const CouplingOptions& opts);

struct ProbeResult {
  double eta_power = 0.0;            // spectral radius estimate of the coupling map
  std::vector<double> power_ratios;  // per power step, best sample
  double eta_t_iteration = 0.0;      // observed contraction of the constant-coefficient iteration
  bool t_iteration_converged = false;
  int samples = 0;
};

/// Power iteration on random displacement samples (seeded) and the T-iteration ratio for `dg`.
ProbeResult contraction_probe(const SensitivitySolver& solver, const VelocityData& dg, int n_samples,
                              std::uint64_t seed, int power_steps = 30);

/// Spectral radius of a dense matrix (eigenvalue oracle).
double spectral_radius(const Eigen::MatrixXd& m);

/// Random displacement supported on the interface, zero on clamped dofs.
FEFunction random_interface_displacement(const Discretization& disc, std::uint64_t seed, double scale);

void write_taylor_csv(std::ostream& os, const TaylorReport& r);

}  // namespace fsisens
