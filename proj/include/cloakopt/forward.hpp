#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "cloakopt/assembly.hpp"
#include "cloakopt/control.hpp"
#include "cloakopt/linear_solver.hpp"
#include "cloakopt/regions.hpp"

namespace cloakopt {

/// Uniform time grid t_i = i * T / N, i = 0..N, for the theta-method.
struct TimeGrid {
  double final_time = 2.0;
  int steps = 14;
  double theta = 1.0;
  /// Rectangle rule of the cost: right end points (1..N) when true, left end
  /// points (0..N-1) when false.
  bool include_final = true;

  double dt() const { return final_time / steps; }
  std::vector<double> times() const;
  void validate() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> fields;

  std::size_t size() const { return fields.size(); }
};

/// Operators of the reference (obstacle-free) problem on the full mesh.
struct ReferenceOperators {
  SparseMatrix mass;
  SparseMatrix system;  // A + A_r
  Vector load;
};

ReferenceOperators build_reference_operators(const ProblemData& data, const TriMesh& mesh);

/// (A + A_r) z = F on the unperturbed mesh.
Vector solve_reference_steady(const ProblemData& data, const TriMesh& mesh);

/// M dz/dt + (A + A_r) z = F from z(0) = 0 with the theta-method.
Trajectory solve_reference_transient(const ProblemData& data, const TriMesh& mesh, const TimeGrid& grid);

/// Everything the state, adjoint and cost evaluations need on the masked
/// domain. Immutable after construction.
class CloakProblem {
 public:
  CloakProblem(MaskedDomain domain, ProblemData data);

  const MaskedDomain& domain() const { return domain_; }
  const TriMesh& mesh() const { return domain_.mesh; }
  const RegionTags& tags() const { return domain_.tags; }
  const ProblemData& data() const { return data_; }

  std::size_t num_state() const { return domain_.mesh.num_nodes(); }
  std::size_t num_controls() const { return domain_.tags.cloak_nodes.size(); }

  const SparseMatrix& mass() const { return mass_; }
  /// E (A + A_r) E^T
  const SparseMatrix& base_operator() const { return base_; }
  /// E F
  const Vector& load() const { return load_; }
  const ControlTensor& tensor(Direction d) const;
  const SparseMatrix& observation_mass() const { return obs_mass_; }
  const SparseMatrix& control_mass() const { return ctrl_mass_; }
  const SparseMatrix& control_stiffness() const { return ctrl_stiff_; }
  const DirichletReduction& dirichlet() const { return dirichlet_; }

  /// S(c) = E (A + A_r) E^T + B_u u + B_f f + B_v v
  SparseMatrix system_matrix(const ControlField& ctrl) const;

  /// Throws InvalidArgument on a size mismatch and DomainError when K is not
  /// positive definite at some control node.
  void check_controls(const ControlField& ctrl) const;

  /// Field that equals T_o on the obstacle outline and 0 elsewhere.
  Vector initial_state() const;

 private:
  MaskedDomain domain_;
  ProblemData data_;
  SparseMatrix mass_, base_, obs_mass_, ctrl_mass_, ctrl_stiff_;
  Vector load_;
  ControlTensor b_u_, b_f_, b_v_;
  DirichletReduction dirichlet_;
};

/// Steady state with controls; Dirichlet nodes carry T_o exactly.
Vector solve_state_steady(const CloakProblem& problem, const ControlField& ctrl);

struct SteadySolution {
  Vector state;
  /// Factorization of the reduced operator; S is symmetric, so the adjoint
  /// solve reuses it.
  std::shared_ptr<const SymmetricSolver> solver;
};

SteadySolution solve_state_steady_factored(const CloakProblem& problem, const ControlField& ctrl);

/// One theta step
///   (M + theta dt S(c_next)) q_next = (M - (1 - theta) dt S(c_prev)) q_prev + dt (E F + F_o).
/// The implicit factorization is kept while consecutive calls use identical
/// next-controls.
class ThetaStepper {
 public:
  ThetaStepper(const CloakProblem& problem, double dt, double theta);

  Vector step(const Vector& prev, const ControlField& ctrl_prev, const ControlField& ctrl_next);

  /// Solver used by the most recent step.
  std::shared_ptr<const SymmetricSolver> last_solver() const { return solver_; }
  std::size_t factorizations() const { return factorizations_; }

  /// M - (1 - theta) dt S(c) applied to a full state vector.
  Vector explicit_apply(const Vector& q, const ControlField& ctrl) const;
  /// M + theta dt S(c) on the full state.
  SparseMatrix implicit_matrix(const ControlField& ctrl) const;

 private:
  const CloakProblem* problem_;
  double dt_, theta_;
  std::shared_ptr<const SymmetricSolver> solver_;
  SparseMatrix implicit_full_;
  ControlField key_;
  std::size_t factorizations_ = 0;
};

struct TransientSolution {
  Trajectory trajectory;
  /// Implicit solver of step i -> i+1, stored at index i + 1 (index 0 unused).
  std::vector<std::shared_ptr<const SymmetricSolver>> step_solvers;
  std::size_t factorizations = 0;
};

TransientSolution integrate_transient(const CloakProblem& problem, const ControlTrajectory& ctrl,
                                      const TimeGrid& grid);

Trajectory solve_transient(const CloakProblem& problem, const ControlTrajectory& ctrl, const TimeGrid& grid);

/// Reference trajectory restricted to the masked domain (E z_i).
Trajectory restrict_trajectory(const RestrictionMap& map, const Trajectory& ref);

}  // namespace cloakopt
