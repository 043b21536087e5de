#pragma once

#include <Eigen/SparseLU>

#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "fsisens/fem.hpp"

namespace fsisens {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DirichletConflict : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Prescribed value of one unknown in the monolithic (velocity, then pressure) numbering.
struct Constraint {
  int dof = -1;
  double value = 0.0;
};

/// Block saddle system [A B; C D] [v; p] = [f; g]. Elasticity uses the A block only.
struct SparseSaddleSystem {
  SparseMatrix A, B, C, D;
  Vector rhs_v, rhs_p;
  std::vector<Constraint> constraints;
  /// False when no natural boundary fixes the pressure constant (all-Dirichlet velocity).
  bool pressure_determined = true;

  static SparseSaddleSystem velocity_only(SparseMatrix a, Vector rhs);

  int n_velocity() const { return static_cast<int>(A.rows()); }
  int n_pressure() const { return static_cast<int>(D.rows()); }
  int size() const { return n_velocity() + n_pressure(); }
  SparseMatrix monolithic() const;
  Vector rhs() const;
};

/// Splits a monolithic matrix of size nv + np back into blocks.
SparseSaddleSystem split_blocks(const SparseMatrix& k, const Vector& rhs, int nv);

/// Symmetric elimination: the right-hand side is lifted with the constrained columns, then
/// constrained rows and columns are replaced by identity. Throws DirichletConflict when one
/// dof receives two different values.
SparseSaddleSystem apply_dirichlet(const SparseSaddleSystem& sys, std::span<const Constraint> constraints);

/// Merges constraints, dropping exact duplicates; conflicting values throw.
std::vector<Constraint> merge_constraints(std::span<const Constraint> constraints);

/// LU factorization with residual verification (||Ax - b|| <= 1e-10 ||b||) and up to two
/// steps of iterative refinement.
class SparseFactorization {
 public:
  SparseFactorization() = default;
  explicit SparseFactorization(const SparseMatrix& a);
  SparseFactorization(SparseFactorization&&) noexcept = default;
  SparseFactorization& operator=(SparseFactorization&&) noexcept = default;

  Vector solve(const Vector& b) const;
  const SparseMatrix& matrix() const { return a_; }
  bool ready() const { return lu_ != nullptr; }

  static constexpr double residual_tolerance = 1e-10;

 private:
  SparseMatrix a_;
  std::unique_ptr<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>> lu_;
};

Vector solve_sparse(const SparseMatrix& a, const Vector& b);
/// Solves a constrained saddle system; constrained unknowns are returned bit-exact.
Vector solve_sparse(const SparseSaddleSystem& sys);

/// Factorizes a matrix once for a fixed set of constrained dofs and solves for many
/// right-hand sides and constraint values by lifting.
class ConstrainedSolver {
 public:
  ConstrainedSolver() = default;
  ConstrainedSolver(SparseMatrix k, std::vector<int> constrained);

  /// `values` is a full-length vector of which only the constrained entries are read.
  Vector solve(const Vector& rhs, const Vector& values) const;
  const SparseMatrix& matrix() const { return k_; }
  const std::vector<int>& constrained() const { return constrained_; }
  bool ready() const { return factor_.ready(); }

 private:
  SparseMatrix k_;
  std::vector<int> constrained_;
  std::vector<char> is_constrained_;
  SparseFactorization factor_;
};

/// Coordinate (triplet) text export: "row col value" per line, preceded by "rows cols nnz".
void write_triplets(std::ostream& os, const SparseMatrix& m);

}  // namespace fsisens
