#include "cloakopt/linear_solver.hpp"

#include <cmath>
#include <string>

#include "cloakopt/errors.hpp"

namespace cloakopt {

SymmetricSolver::SymmetricSolver(SparseMatrix a, double tolerance) : a_(std::move(a)), tolerance_(tolerance) {
  if (a_.rows() != a_.cols()) throw SolverError("matrix is not square");
  a_.makeCompressed();
  ldlt_.compute(a_);
  if (ldlt_.info() != Eigen::Success) throw SolverError("LDL^T factorization failed");
  const Vector d = ldlt_.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d[i] == 0.0 || !std::isfinite(d[i])) throw SolverError("matrix is singular");
  }
}

Vector SymmetricSolver::solve(const Vector& b) const {
  if (b.size() != a_.rows()) throw SolverError("right-hand side has wrong length");
  const double bnorm = b.norm();
  if (bnorm == 0.0) return Vector::Zero(b.size());
  Vector x = ldlt_.solve(b);
  const double rel = (a_ * x - b).norm() / bnorm;
  if (!(rel <= tolerance_)) {
    throw SolverError("linear residual " + std::to_string(rel) + " exceeds tolerance");
  }
  return x;
}

}  // namespace cloakopt
