#pragma once

#include <Eigen/SparseCholesky>

#include "cloakopt/assembly.hpp"

namespace cloakopt {

/// Sparse LDL^T factorization of a symmetric matrix. Every solve checks the
/// relative residual against `tolerance` and throws SolverError otherwise.
class SymmetricSolver {
 public:
  explicit SymmetricSolver(SparseMatrix a, double tolerance = 1e-10);

  SymmetricSolver(const SymmetricSolver&) = delete;
  SymmetricSolver& operator=(const SymmetricSolver&) = delete;

  Vector solve(const Vector& b) const;

  const SparseMatrix& matrix() const { return a_; }
  std::size_t size() const { return static_cast<std::size_t>(a_.rows()); }

 private:
  SparseMatrix a_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  double tolerance_;
};

}  // namespace cloakopt
