#include "cloakopt/adjoint.hpp"

#include <utility>

#include "cloakopt/errors.hpp"

namespace cloakopt {

namespace {

void require_same_size(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) throw InvalidArgument(std::string(what) + ": dimension mismatch");
}

double quadratic(const SparseMatrix& m, const Vector& x) { return x.dot(m * x); }

void require_aligned(const Trajectory& q, const Trajectory& z, const ControlTrajectory& ctrl, const TimeGrid& grid) {
  const auto n = static_cast<std::size_t>(grid.steps) + 1;
  if (q.size() != n || z.size() != n || ctrl.size() != n) {
    throw InvalidArgument("trajectories and controls must have N + 1 slices");
  }
}

}  // namespace

double misfit(const CloakProblem& problem, const Vector& q, const Vector& z) {
  require_same_size(q, z, "misfit");
  if (static_cast<std::size_t>(q.size()) != problem.num_state()) throw InvalidArgument("misfit: wrong state size");
  return 0.5 * quadratic(problem.observation_mass(), q - z);
}

double regularization(const CloakProblem& problem, const ControlField& ctrl) {
  const auto& d = problem.data();
  const auto& m = problem.control_mass();
  const auto& a = problem.control_stiffness();
  return 0.5 * (d.beta * quadratic(m, ctrl.u) + d.beta_g * quadratic(a, ctrl.u) + d.xi * quadratic(m, ctrl.f) +
                d.xi_g * quadratic(a, ctrl.f) + d.gamma * quadratic(m, ctrl.v) + d.gamma_g * quadratic(a, ctrl.v));
}

GradientTriple regularization_gradient(const CloakProblem& problem, const ControlField& ctrl) {
  const auto& d = problem.data();
  const auto& m = problem.control_mass();
  const auto& a = problem.control_stiffness();
  GradientTriple g;
  g.u = d.beta * (m * ctrl.u) + d.beta_g * (a * ctrl.u);
  g.f = d.xi * (m * ctrl.f) + d.xi_g * (a * ctrl.f);
  g.v = d.gamma * (m * ctrl.v) + d.gamma_g * (a * ctrl.v);
  return g;
}

double eval_cost(const CloakProblem& problem, const Vector& q, const Vector& z, const ControlField& ctrl) {
  return misfit(problem, q, z) + regularization(problem, ctrl);
}

bool in_cost_sum(const TimeGrid& grid, std::size_t i) {
  const auto n = static_cast<std::size_t>(grid.steps);
  return grid.include_final ? (i >= 1 && i <= n) : (i < n);
}

double eval_cost(const CloakProblem& problem, const Trajectory& q, const Trajectory& z,
                 const ControlTrajectory& ctrl, const TimeGrid& grid) {
  require_aligned(q, z, ctrl, grid);
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!in_cost_sum(grid, i)) continue;
    sum += misfit(problem, q.fields[i], z.fields[i]) + regularization(problem, ctrl[i]);
  }
  return grid.dt() * sum;
}

Vector solve_adjoint_steady(const CloakProblem& problem, const SymmetricSolver& state_solver, const Vector& q,
                            const Vector& z) {
  require_same_size(q, z, "solve_adjoint_steady");
  const auto& red = problem.dirichlet();
  // S is symmetric, so the state factorization also solves S^T p = r.
  const Vector rhs = red.restrict_free(problem.observation_mass() * (q - z));
  return red.expand(state_solver.solve(rhs), 0.0);
}

Vector solve_adjoint_steady(const CloakProblem& problem, const Vector& q, const Vector& z, const ControlField& ctrl) {
  problem.check_controls(ctrl);
  const SparseMatrix st = SparseMatrix(problem.system_matrix(ctrl).transpose());
  const SymmetricSolver solver(problem.dirichlet().reduce(st));
  return solve_adjoint_steady(problem, solver, q, z);
}

Trajectory solve_adjoint_transient(const CloakProblem& problem, const TransientSolution& forward, const Trajectory& z,
                                   const ControlTrajectory& ctrl, const TimeGrid& grid) {
  const auto& q = forward.trajectory;
  require_aligned(q, z, ctrl, grid);
  const auto n = static_cast<std::size_t>(grid.steps);
  const double dt = grid.dt();
  const auto& red = problem.dirichlet();
  ThetaStepper ops(problem, dt, grid.theta);

  Trajectory p;
  p.times = q.times;
  p.fields.assign(n + 1, Vector::Zero(static_cast<Eigen::Index>(problem.num_state())));
  for (std::size_t i = n; i >= 1; --i) {
    Vector rhs = Vector::Zero(static_cast<Eigen::Index>(problem.num_state()));
    if (in_cost_sum(grid, i)) rhs += dt * (problem.observation_mass() * (q.fields[i] - z.fields[i]));
    // A-(c_i) is symmetric: its transpose acts like the explicit operator.
    if (i < n) rhs += ops.explicit_apply(p.fields[i + 1], ctrl[i]);
    const auto& solver = forward.step_solvers[i];
    if (!solver) throw InvalidArgument("forward solution lacks the implicit factorization of step " + std::to_string(i));
    p.fields[i] = red.expand(solver->solve(red.restrict_free(rhs)), 0.0);
  }
  return p;
}

GradientTriple eval_gradient(const CloakProblem& problem, const Vector& q, const Vector& p, const ControlField& ctrl) {
  GradientTriple g = regularization_gradient(problem, ctrl);
  g.u -= problem.tensor(Direction::U).contract_pair(p, q);
  g.f -= problem.tensor(Direction::L).contract_pair(p, q);
  g.v -= problem.tensor(Direction::S).contract_pair(p, q);
  return g;
}

ControlTrajectory eval_gradient(const CloakProblem& problem, const Trajectory& q, const Trajectory& p,
                                const ControlTrajectory& ctrl, const TimeGrid& grid) {
  require_aligned(q, p, ctrl, grid);
  const auto n = static_cast<std::size_t>(grid.steps);
  const double dt = grid.dt();
  const double theta = grid.theta;
  ControlTrajectory grad(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    // Adjoint weight applied to B q_i: theta from the implicit side of step
    // i-1 -> i, (1 - theta) from the explicit side of step i -> i+1.
    Vector w = Vector::Zero(static_cast<Eigen::Index>(problem.num_state()));
    if (i >= 1) w += theta * dt * p.fields[i];
    if (i < n && theta < 1.0) w += (1.0 - theta) * dt * p.fields[i + 1];

    GradientTriple g;
    if (in_cost_sum(grid, i)) {
      g = regularization_gradient(problem, ctrl[i]);
      g.u *= dt;
      g.f *= dt;
      g.v *= dt;
    } else {
      g = ControlField::zeros(problem.num_controls());
    }
    g.u -= problem.tensor(Direction::U).contract_pair(w, q.fields[i]);
    g.f -= problem.tensor(Direction::L).contract_pair(w, q.fields[i]);
    g.v -= problem.tensor(Direction::S).contract_pair(w, q.fields[i]);
    grad[i] = std::move(g);
  }
  return grad;
}

SteadyObjective::SteadyObjective(const CloakProblem& problem, Vector z) : problem_(&problem), z_(std::move(z)) {
  if (static_cast<std::size_t>(z_.size()) != problem.num_state()) {
    throw InvalidArgument("reference field does not match the masked mesh");
  }
}

double SteadyObjective::value(const ControlTrajectory& ctrl) {
  if (ctrl.size() != 1) throw InvalidArgument("steady objective takes one control slice");
  return eval_cost(*problem_, solve_state_steady(*problem_, ctrl[0]), z_, ctrl[0]);
}

Evaluation SteadyObjective::value_and_gradient(const ControlTrajectory& ctrl) {
  if (ctrl.size() != 1) throw InvalidArgument("steady objective takes one control slice");
  const auto state = solve_state_steady_factored(*problem_, ctrl[0]);
  const Vector p = solve_adjoint_steady(*problem_, *state.solver, state.state, z_);
  Evaluation out;
  out.value = eval_cost(*problem_, state.state, z_, ctrl[0]);
  out.gradient = {eval_gradient(*problem_, state.state, p, ctrl[0])};
  return out;
}

TransientObjective::TransientObjective(const CloakProblem& problem, Trajectory z, TimeGrid grid)
    : problem_(&problem), z_(std::move(z)), grid_(grid) {
  grid_.validate();
  if (z_.size() != static_cast<std::size_t>(grid_.steps) + 1) {
    throw InvalidArgument("reference trajectory does not match the time grid");
  }
}

double TransientObjective::value(const ControlTrajectory& ctrl) {
  return eval_cost(*problem_, solve_transient(*problem_, ctrl, grid_), z_, ctrl, grid_);
}

Evaluation TransientObjective::value_and_gradient(const ControlTrajectory& ctrl) {
  const auto fwd = integrate_transient(*problem_, ctrl, grid_);
  const auto p = solve_adjoint_transient(*problem_, fwd, z_, ctrl, grid_);
  Evaluation out;
  out.value = eval_cost(*problem_, fwd.trajectory, z_, ctrl, grid_);
  out.gradient = eval_gradient(*problem_, fwd.trajectory, p, ctrl, grid_);
  return out;
}

}  // namespace cloakopt
