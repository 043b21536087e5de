#pragma once

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fsisens/fem.hpp"
#include "fsisens/forms.hpp"
#include "fsisens/geomap.hpp"
#include "fsisens/linalg.hpp"

namespace fsisens {

/// Parabolic inflow m * 4 y (H - y) / H^2 in the x direction; vanishes at both channel walls.
struct InflowProfile {
  double magnitude = 0.0;
  double height = 1.0;
  Vec2 operator()(const Point& x) const {
    return {magnitude * 4.0 * x.y * (height - x.y) / (height * height), 0.0};
  }
};

using VelocityData = std::function<Vec2(const Point&)>;

/// Dirichlet velocity data. Interface dofs are always zero; empty callables mean zero.
struct DirichletData {
  VelocityData inflow;
  VelocityData wall;
};

DirichletData inflow_data(const InflowProfile& g);

struct FluidState {
  FEFunction w;  // velocity space
  FEFunction p;  // pressure space

  static FluidState zero(const Discretization& disc);
  static FluidState from_monolithic(const Discretization& disc, const Vector& x);
  Vector monolithic() const;
};

struct SolverReport {
  int iterations = 0;
  std::vector<double> residual_history;  // nonlinear or linear residual after each iterate
  std::vector<double> increments;        // relative H1 x L2 increments
  std::vector<double> increment_ratios;  // observed contraction factors
  bool converged = false;

  double max_ratio() const;
};

struct PicardOptions {
  double tol = 1e-10;
  int max_iter = 50;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, SolverReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const SolverReport& report() const { return report_; }

 private:
  SolverReport report_;
};

/// Sorted velocity dofs with Dirichlet data: inflow, wall and interface.
std::vector<int> fluid_dirichlet_dofs(const Discretization& disc);
/// Full-length monolithic vector holding the Dirichlet values; walls win at shared corners.
Vector fluid_dirichlet_values(const Discretization& disc, const DirichletData& data);

/// H1 norm of the velocity difference plus L2 norm of the pressure difference.
double product_norm(const Discretization& disc, const Vector& x);

/// Transformed Navier-Stokes solver by Picard iteration around the identity-coefficient Stokes
/// operator, which is factorized once per discretization.
class FluidSolver {
 public:
  FluidSolver(const Discretization& disc, double nu);

  std::pair<FluidState, SolverReport> solve(const TransformFields& fields, const DirichletData& bc,
                                            const FluidData& data, const PicardOptions& opts,
                                            const FluidState* warm_start = nullptr) const;
  /// Euclidean norm of the weak residual on free rows plus the Dirichlet mismatch.
  double residual(const TransformFields& fields, const FluidState& state, const DirichletData& bc,
                  const FluidData& data) const;

  const Discretization& discretization() const { return *disc_; }
  double nu() const { return nu_; }
  const std::vector<int>& dirichlet() const { return dirichlet_; }

 private:
  const Discretization* disc_;
  double nu_;
  std::vector<int> dirichlet_;
  ConstrainedSolver stokes_;
};

std::pair<FluidState, SolverReport> solve_navier_stokes(const Discretization& disc, const TransformFields& fields,
                                                        const InflowProfile& g, const FluidData& data, double nu,
                                                        const PicardOptions& opts = {});

/// Largest |outflow functional| over outflow test functions: the integral over the outflow
/// boundary of (nu (grad w) A n - p K n) . psi, with A and K evaluated exactly from the flow
/// map (identity when `map` is null).
double outflow_functional(const Discretization& disc, const FlowMap* map, const FluidState& state, double nu);

enum class LinearizedMode { direct, t_iteration };

/// Linearization of the transformed system at a base state. The direct operator is factorized
/// at construction; the constant-coefficient iteration factorizes the identity-coefficient Oseen
/// operator on first use.
class LinearizedSolver {
 public:
  LinearizedSolver(const Discretization& disc, const TransformFields& fields, FluidState base, double nu);

  /// Direct solve. `rhs` is a monolithic load; Dirichlet rows are ignored.
  FluidState solve(const Vector& rhs, const DirichletData& bc) const;
  /// Constant-coefficient fixed point. Divergence is reported in the returned report.
  std::pair<FluidState, SolverReport> iterate(const Vector& rhs, const DirichletData& bc,
                                              const PicardOptions& opts) const;
  /// Load produced by a flow map perturbation: minus the shape derivative of the operator.
  Vector shape_rhs(const TransformDerivatives& d) const;

  const FluidState& base() const { return base_; }
  const TransformFields& fields() const { return *fields_; }

 private:
  const Discretization* disc_;
  const TransformFields* fields_;
  FluidState base_;
  double nu_;
  std::vector<int> dirichlet_;
  ConstrainedSolver direct_;
  mutable ConstrainedSolver identity_;
};

std::pair<FluidState, SolverReport> solve_linearized(const Discretization& disc, const TransformFields& fields,
                                                     const TransformDerivatives* derivs, const FluidState& base,
                                                     const FluidData& data, const DirichletData& bc, double nu,
                                                     LinearizedMode mode, const PicardOptions& opts = {});

// ---------------------------------------------------------------------------------------------
// manufactured solutions

struct ExactSolution {
  std::function<Vec2(const Point&)> w;
  std::function<Mat2(const Point&)> grad_w;  // row i = grad of component i
  std::function<double(const Point&)> p;
  FluidData data;  // forcing consistent with the chosen viscosity on the unit square
};

/// Divergence-free trigonometric pair on the unit square with outflow at x = 1.
ExactSolution trigonometric_solution(double nu);
/// Pair contained in the Taylor-Hood space (quadratic velocity, linear pressure).
ExactSolution polynomial_solution(double nu);

struct MMSLevel {
  double h = 0.0;
  int dofs = 0;
  double error_w_h1 = 0.0;
  double error_p_l2 = 0.0;
  int picard_iterations = 0;
};

struct MMSResult {
  std::vector<MMSLevel> levels;
  double rate_w_fit = 0.0, rate_p_fit = 0.0;    // least-squares over all levels
  double rate_w_last = 0.0, rate_p_last = 0.0;  // between the two finest levels
};

/// Errors of the untransformed solver on the unit square (h0 and `levels - 1` uniform
/// refinements) with Dirichlet data on inflow and walls and natural data at the outflow.
MMSResult mms_convergence_study(const ExactSolution& exact, int levels, double h0, double nu);

std::pair<double, double> solution_errors(const Discretization& disc, const FluidState& state,
                                          const ExactSolution& exact);

/// Least-squares slope of log(err) against log(h).
double loglog_slope(const std::vector<double>& h, const std::vector<double>& err);

}  // namespace fsisens
