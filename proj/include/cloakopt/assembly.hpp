#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cloakopt/mesh.hpp"
#include "cloakopt/regions.hpp"

namespace cloakopt {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Matrix2 = Eigen::Matrix2d;

/// Constant heat source supported on a disk (or on the whole domain).
/// An element belongs to the support when its centroid does.
struct SourceSpec {
  Point center{1.0, 0.0};
  double radius = 0.15;
  double magnitude = 100.0;
  bool whole_domain = false;

  bool contains(const Point& p) const;
};

/// Physical and regularization parameters of the cloaking problem.
struct ProblemData {
  double mu = 1.0;        // background diffusivity [m^2/s]
  double alpha = 1.0;     // Robin coefficient
  double T_o = 0.0;       // obstacle temperature
  double epsilon = 1e-3;  // margin on the positive-definiteness constraints
  double beta = 1e-9, beta_g = 7e-6;
  double xi = 1e-9, xi_g = 7e-6;
  double gamma = 1e-9, gamma_g = 5e-5;
  /// +1: absorbing condition -mu dq/dn = alpha q, coercive for every mu > 0.
  /// -1: the literal sign of the boundary matrix in the original formulation.
  int robin_sign = +1;
  SourceSpec source;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Gradients of the three P1 basis functions on triangle e (constant).
std::array<Eigen::Vector2d, 3> basis_gradients(const TriMesh& mesh, std::size_t e);

/// P1 mass matrix over all triangles, or over the listed ones.
SparseMatrix assemble_mass(const TriMesh& mesh);
SparseMatrix assemble_mass(const TriMesh& mesh, std::span<const std::size_t> elems);

/// P1 stiffness matrix with scalar diffusivity.
SparseMatrix assemble_stiffness(const TriMesh& mesh, double mu);
/// P1 stiffness matrix with one SPD 2x2 diffusivity per triangle.
SparseMatrix assemble_stiffness(const TriMesh& mesh, std::span<const Matrix2> diffusivity);

/// sign * alpha * boundary mass over the edges carrying `label`.
SparseMatrix assemble_robin(const TriMesh& mesh, BoundaryLabel label, int sign, double alpha = 1.0);

/// F_i = integral of s phi_i over the source support.
Vector assemble_load(const TriMesh& mesh, const SourceSpec& source);

/// Mass and stiffness of the cloak elements expressed on control DOFs
/// (tags.cloak_nodes order). Used by the Tikhonov and gradient penalties.
SparseMatrix assemble_control_mass(const TriMesh& mesh, const RegionTags& tags);
SparseMatrix assemble_control_stiffness(const TriMesh& mesh, const RegionTags& tags);

enum class Direction { U, L, S };

/// U = [[1,0],[0,0]], L = [[0,0],[0,1]], S = [[0,1],[1,0]].
Matrix2 direction_matrix(Direction d);

/// Sparse rank-3 tensor
///   B(i, j, k) = int_{cloak} phi_k (D grad phi_i) . grad phi_j
/// with k running over control DOFs. Entries are stored grouped by k.
class ControlTensor {
 public:
  struct Entry {
    int row;
    int col;
    double value;
  };

  ControlTensor() = default;
  ControlTensor(std::size_t n_state, std::vector<std::vector<Entry>> slices);

  std::size_t n_rows() const { return n_state_; }
  std::size_t n_cols() const { return n_state_; }
  std::size_t n_ctrl() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_entries() const { return entries_.size(); }

  std::span<const Entry> slice_entries(std::size_t k) const {
    return {entries_.data() + offsets_[k], offsets_[k + 1] - offsets_[k]};
  }
  SparseMatrix slice(std::size_t k) const;

  /// sum_k ctrl_k B(:, :, k)
  SparseMatrix contract(const Vector& ctrl) const;
  /// Triplets of the contraction, for callers that merge several tensors.
  void contract_into(const Vector& ctrl, std::vector<Eigen::Triplet<double>>& out) const;

  /// g_k = sum_{i,j} B(i, j, k) p_i q_j
  Vector contract_pair(const Vector& p, const Vector& q) const;

 private:
  std::size_t n_state_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<Entry> entries_;
};

ControlTensor assemble_control_tensor(const TriMesh& mesh, const RegionTags& tags, Direction d);

/// Symmetric elimination of Dirichlet nodes.
class DirichletReduction {
 public:
  DirichletReduction() = default;
  DirichletReduction(std::size_t n, std::vector<int> dirichlet_nodes);

  std::size_t size() const { return n_; }
  std::size_t num_free() const { return free_.size(); }
  const std::vector<int>& free_nodes() const { return free_; }
  const std::vector<int>& dirichlet_nodes() const { return dirichlet_; }

  /// A restricted to free rows and columns.
  SparseMatrix reduce(const SparseMatrix& a) const;
  /// -A(free, dirichlet) * value: the right-hand side contribution of the
  /// Dirichlet data.
  Vector lifting(const SparseMatrix& a, double value) const;

  Vector restrict_free(const Vector& full) const;
  /// Inserts `value` at the Dirichlet nodes.
  Vector expand(const Vector& free_values, double value) const;

 private:
  std::size_t n_ = 0;
  std::vector<int> free_;
  std::vector<int> dirichlet_;
  SparseMatrix select_free_;
  SparseMatrix select_dirichlet_;
};

struct ReducedSystem {
  SparseMatrix matrix;
  Vector rhs;
};

/// Removes Dirichlet rows/columns and moves their coupling to the right-hand
/// side: rhs_f - A_fd * value.
ReducedSystem apply_dirichlet(const SparseMatrix& a, const Vector& rhs, const DirichletReduction& red,
                              double value);

}  // namespace cloakopt
