#pragma once

#include <array>
#include <functional>
#include <vector>

#include "fsisens/fem.hpp"
#include "fsisens/forms.hpp"
#include "fsisens/geomap.hpp"
#include "fsisens/linalg.hpp"

namespace fsisens {

/// Full traction vector, or its projection onto the interface normal.
enum class TractionMode { full_vector, normal_projected };

std::string_view to_string(TractionMode m);
TractionMode parse_traction_mode(std::string_view s);

/// Interface traction stored per interface edge at its three quadratic nodes (a, mid, b).
/// A pressure-times-cofactor traction is quadratic along an edge, so this is exact.
struct TractionTrace {
  std::vector<int> edges;  // indices into Discretization::tagged_edges()
  std::vector<std::array<Vec2, 3>> values;

  static TractionTrace zero(const Discretization& disc);
  double max_abs() const;
};

std::vector<int> interface_edges(const Discretization& disc);

/// Weak Neumann load: the integral of t . psi over the interface, in displacement numbering.
Vector traction_load(const Discretization& disc, const TractionTrace& t);
Vector volume_load(const Discretization& disc, const std::function<Vec2(const Point&)>& f1);

/// Clamped elasticity operator, factorized once.
class ElasticitySolver {
 public:
  ElasticitySolver(const Discretization& disc, const Lame& lame);

  FEFunction solve(const Vector& load) const;
  FEFunction solve(const std::function<Vec2(const Point&)>& f1, const TractionTrace& t) const;
  /// Euclidean norm of the residual on the free rows.
  double residual(const FEFunction& u, const Vector& load) const;

  const SparseMatrix& matrix() const { return k_; }
  const std::vector<int>& clamped() const { return solver_.constrained(); }
  const Lame& lame() const { return lame_; }

 private:
  const Discretization* disc_;
  Lame lame_;
  SparseMatrix k_;
  ConstrainedSolver solver_;
};

FEFunction solve_elasticity(const Discretization& disc, const std::function<Vec2(const Point&)>& f1,
                            const TractionTrace& t, const Lame& lame);

}  // namespace fsisens
