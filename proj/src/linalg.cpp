#include "fsisens/linalg.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>
#include <string>

namespace fsisens {

SparseSaddleSystem SparseSaddleSystem::velocity_only(SparseMatrix a, Vector rhs) {
  SparseSaddleSystem s;
  const auto n = a.rows();
  s.A = std::move(a);
  s.B = SparseMatrix(n, 0);
  s.C = SparseMatrix(0, n);
  s.D = SparseMatrix(0, 0);
  s.rhs_v = std::move(rhs);
  s.rhs_p = Vector::Zero(0);
  return s;
}

SparseMatrix SparseSaddleSystem::monolithic() const {
  const int nv = n_velocity(), np = n_pressure();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(A.nonZeros() + B.nonZeros() + C.nonZeros() + D.nonZeros());
  auto add = [&t](const SparseMatrix& m, int r0, int c0) {
    for (int k = 0; k < m.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(m, k); it; ++it)
        t.emplace_back(static_cast<int>(it.row()) + r0, static_cast<int>(it.col()) + c0, it.value());
  };
  add(A, 0, 0);
  add(B, 0, nv);
  add(C, nv, 0);
  add(D, nv, nv);
  SparseMatrix k(nv + np, nv + np);
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

Vector SparseSaddleSystem::rhs() const {
  Vector r(size());
  r << rhs_v, rhs_p;
  return r;
}

SparseSaddleSystem split_blocks(const SparseMatrix& k, const Vector& rhs, int nv) {
  const int n = static_cast<int>(k.rows());
  const int np = n - nv;
  SparseSaddleSystem s;
  s.A = k.topLeftCorner(nv, nv);
  s.B = k.topRightCorner(nv, np);
  s.C = k.bottomLeftCorner(np, nv);
  s.D = k.bottomRightCorner(np, np);
  s.rhs_v = rhs.head(nv);
  s.rhs_p = rhs.tail(np);
  return s;
}

std::vector<Constraint> merge_constraints(std::span<const Constraint> constraints) {
  std::map<int, double> seen;
  std::vector<Constraint> out;
  for (const auto& c : constraints) {
    auto [it, inserted] = seen.emplace(c.dof, c.value);
    if (inserted)
      out.push_back(c);
    else if (it->second != c.value)
      throw DirichletConflict("conflicting Dirichlet values at dof " + std::to_string(c.dof));
  }
  return out;
}

SparseSaddleSystem apply_dirichlet(const SparseSaddleSystem& sys, std::span<const Constraint> constraints) {
  auto merged = merge_constraints(constraints);
  for (const auto& c : sys.constraints)
    for (const auto& m : merged)
      if (m.dof == c.dof && m.value != c.value)
        throw DirichletConflict("conflicting Dirichlet values at dof " + std::to_string(c.dof));
  const int n = sys.size();
  SparseMatrix k = sys.monolithic();
  Vector rhs = sys.rhs();
  Vector g = Vector::Zero(n);
  std::vector<char> fixed(n, 0);
  for (const auto& c : merged) {
    if (c.dof < 0 || c.dof >= n) throw DirichletConflict("constraint dof out of range");
    g[c.dof] = c.value;
    fixed[c.dof] = 1;
  }
  rhs -= k * g;
  k.prune([&](const Eigen::Index& r, const Eigen::Index& c, const double&) { return !fixed[r] && !fixed[c]; });
  std::vector<Eigen::Triplet<double>> diag;
  for (const auto& c : merged) {
    diag.emplace_back(c.dof, c.dof, 1.0);
    rhs[c.dof] = c.value;
  }
  SparseMatrix id(n, n);
  id.setFromTriplets(diag.begin(), diag.end());
  k += id;
  auto out = split_blocks(k, rhs, sys.n_velocity());
  out.constraints = sys.constraints;
  out.constraints.insert(out.constraints.end(), merged.begin(), merged.end());
  out.pressure_determined = sys.pressure_determined;
  return out;
}

SparseFactorization::SparseFactorization(const SparseMatrix& a) : a_(a) {
  if (a.rows() != a.cols()) throw SolverError("matrix is not square");
  a_.makeCompressed();
  lu_ = std::make_unique<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>>();
  lu_->analyzePattern(a_);
  lu_->factorize(a_);
  if (lu_->info() != Eigen::Success)
    throw SolverError("sparse LU factorization failed: " + lu_->lastErrorMessage());
}

Vector SparseFactorization::solve(const Vector& b) const {
  if (!lu_) throw SolverError("solve called on an empty factorization");
  const double bn = b.norm();
  if (bn == 0.0) return Vector::Zero(b.size());
  Vector x = lu_->solve(b);
  Vector r = b - a_ * x;
  for (int step = 0; step < 2 && r.norm() > 1e-14 * bn; ++step) {
    x += lu_->solve(r);
    r = b - a_ * x;
  }
  if (!x.allFinite() || r.norm() > residual_tolerance * bn)
    throw SolverError("linear solve residual " + std::to_string(r.norm() / bn) +
                      " exceeds tolerance (numerically singular matrix?)");
  return x;
}

Vector solve_sparse(const SparseMatrix& a, const Vector& b) { return SparseFactorization(a).solve(b); }

Vector solve_sparse(const SparseSaddleSystem& sys) {
  if (sys.n_pressure() > 0 && !sys.pressure_determined) {
    const bool pinned = std::any_of(sys.constraints.begin(), sys.constraints.end(),
                                    [&](const Constraint& c) { return c.dof >= sys.n_velocity(); });
    if (!pinned)
      throw SolverError(
          "constant-pressure null space: no natural outflow boundary and no pinned pressure dof");
  }
  Vector x = solve_sparse(sys.monolithic(), sys.rhs());
  for (const auto& c : sys.constraints) x[c.dof] = c.value;
  return x;
}

ConstrainedSolver::ConstrainedSolver(SparseMatrix k, std::vector<int> constrained)
    : k_(std::move(k)), constrained_(std::move(constrained)) {
  const int n = static_cast<int>(k_.rows());
  std::sort(constrained_.begin(), constrained_.end());
  constrained_.erase(std::unique(constrained_.begin(), constrained_.end()), constrained_.end());
  is_constrained_.assign(n, 0);
  for (int d : constrained_) is_constrained_[d] = 1;
  SparseMatrix kc = k_;
  kc.prune([&](const Eigen::Index& r, const Eigen::Index& c, const double&) {
    return !is_constrained_[r] && !is_constrained_[c];
  });
  std::vector<Eigen::Triplet<double>> diag;
  for (int d : constrained_) diag.emplace_back(d, d, 1.0);
  SparseMatrix id(n, n);
  id.setFromTriplets(diag.begin(), diag.end());
  kc += id;
  factor_ = SparseFactorization(kc);
}

Vector ConstrainedSolver::solve(const Vector& rhs, const Vector& values) const {
  Vector g = Vector::Zero(rhs.size());
  for (int d : constrained_) g[d] = values[d];
  Vector r = rhs - k_ * g;
  for (int d : constrained_) r[d] = g[d];
  Vector x = factor_.solve(r);
  for (int d : constrained_) x[d] = g[d];
  return x;
}

void write_triplets(std::ostream& os, const SparseMatrix& m) {
  os << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n' << std::setprecision(17);
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace fsisens
