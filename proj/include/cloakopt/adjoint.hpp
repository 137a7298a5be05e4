#pragma once

#include <cstddef>

#include "cloakopt/control.hpp"
#include "cloakopt/forward.hpp"

namespace cloakopt {

/// 1/2 (q - z)^T M_obs (q - z), with z already restricted to the masked mesh.
double misfit(const CloakProblem& problem, const Vector& q, const Vector& z);

/// Tikhonov and gradient-seminorm penalty of one control slice:
/// sum over (u, f, v) of 1/2 (w c^T M_u c + w_g c^T A_u c).
double regularization(const CloakProblem& problem, const ControlField& ctrl);

/// Gradient of `regularization`.
GradientTriple regularization_gradient(const CloakProblem& problem, const ControlField& ctrl);

/// Steady cost J = misfit + regularization.
double eval_cost(const CloakProblem& problem, const Vector& q, const Vector& z, const ControlField& ctrl);

/// Transient cost, rectangle rule dt * sum_{i in I} (misfit_i + regularization_i)
/// with I = {1..N} (grid.include_final) or {0..N-1}.
double eval_cost(const CloakProblem& problem, const Trajectory& q, const Trajectory& z,
                 const ControlTrajectory& ctrl, const TimeGrid& grid);

/// Time nodes that enter the rectangle sum.
bool in_cost_sum(const TimeGrid& grid, std::size_t i);

/// S^T p = M_obs (q - z) on the free nodes, p = 0 on the obstacle outline.
/// Pass the factorization of the state solve to reuse it.
Vector solve_adjoint_steady(const CloakProblem& problem, const Vector& q, const Vector& z, const ControlField& ctrl);
Vector solve_adjoint_steady(const CloakProblem& problem, const SymmetricSolver& state_solver, const Vector& q,
                            const Vector& z);

/// Backward recursion of the discrete Lagrangian:
///   A+(c_N)^T p_N = w_N dt M_obs (q_N - z_N)
///   A+(c_i)^T p_i = A-(c_i)^T p_{i+1} + w_i dt M_obs (q_i - z_i),  i = N-1..1
/// with w_i = 1 on the nodes of the cost sum. p_0 is returned as zero.
Trajectory solve_adjoint_transient(const CloakProblem& problem, const TransientSolution& forward, const Trajectory& z,
                                   const ControlTrajectory& ctrl, const TimeGrid& grid);

/// Steady gradient: reg'(c) - (B p) q for each of the three tensors.
GradientTriple eval_gradient(const CloakProblem& problem, const Vector& q, const Vector& p, const ControlField& ctrl);

/// Transient gradient, one triple per time node:
///   w_i dt reg'(c_i) - theta dt (B p_i) q_i - (1 - theta) dt (B p_{i+1}) q_i.
ControlTrajectory eval_gradient(const CloakProblem& problem, const Trajectory& q, const Trajectory& p,
                                const ControlTrajectory& ctrl, const TimeGrid& grid);

struct Evaluation {
  double value = 0.0;
  ControlTrajectory gradient;
};

/// Reduced cost c -> J(q(c), c) with its adjoint gradient.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t num_slices() const = 0;
  virtual std::size_t nodes_per_slice() const = 0;
  virtual double mu() const = 0;

  virtual double value(const ControlTrajectory& ctrl) = 0;
  virtual Evaluation value_and_gradient(const ControlTrajectory& ctrl) = 0;
};

class SteadyObjective final : public Objective {
 public:
  /// z is the reference field restricted to the masked domain.
  SteadyObjective(const CloakProblem& problem, Vector z);

  std::size_t num_slices() const override { return 1; }
  std::size_t nodes_per_slice() const override { return problem_->num_controls(); }
  double mu() const override { return problem_->data().mu; }

  double value(const ControlTrajectory& ctrl) override;
  Evaluation value_and_gradient(const ControlTrajectory& ctrl) override;

 private:
  const CloakProblem* problem_;
  Vector z_;
};

class TransientObjective final : public Objective {
 public:
  TransientObjective(const CloakProblem& problem, Trajectory z, TimeGrid grid);

  std::size_t num_slices() const override { return static_cast<std::size_t>(grid_.steps) + 1; }
  std::size_t nodes_per_slice() const override { return problem_->num_controls(); }
  double mu() const override { return problem_->data().mu; }

  double value(const ControlTrajectory& ctrl) override;
  Evaluation value_and_gradient(const ControlTrajectory& ctrl) override;

 private:
  const CloakProblem* problem_;
  Trajectory z_;
  TimeGrid grid_;
};

}  // namespace cloakopt
