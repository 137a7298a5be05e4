#include "cloakopt/forward.hpp"

#include <string>
#include <utility>

#include "cloakopt/errors.hpp"

namespace cloakopt {

std::vector<double> TimeGrid::times() const {
  std::vector<double> t(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) t[static_cast<std::size_t>(i)] = final_time * i / steps;
  return t;
}

void TimeGrid::validate() const {
  if (!(final_time > 0.0)) throw ConfigError("final time T must be positive");
  if (steps < 1) throw ConfigError("number of time steps N must be at least 1");
  if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in [0, 1]");
}

ReferenceOperators build_reference_operators(const ProblemData& data, const TriMesh& mesh) {
  data.validate();
  ReferenceOperators ops;
  ops.mass = assemble_mass(mesh);
  ops.system = assemble_stiffness(mesh, data.mu) + assemble_robin(mesh, BoundaryLabel::outer, data.robin_sign, data.alpha);
  ops.load = assemble_load(mesh, data.source);
  return ops;
}

Vector solve_reference_steady(const ProblemData& data, const TriMesh& mesh) {
  const auto ops = build_reference_operators(data, mesh);
  const SymmetricSolver solver(ops.system);
  return solver.solve(ops.load);
}

Trajectory solve_reference_transient(const ProblemData& data, const TriMesh& mesh, const TimeGrid& grid) {
  grid.validate();
  const auto ops = build_reference_operators(data, mesh);
  const double dt = grid.dt();
  const SymmetricSolver solver(SparseMatrix(ops.mass + grid.theta * dt * ops.system));
  const SparseMatrix explicit_part = ops.mass - (1.0 - grid.theta) * dt * ops.system;
  const Vector forcing = dt * ops.load;

  Trajectory traj;
  traj.times = grid.times();
  traj.fields.reserve(traj.times.size());
  traj.fields.push_back(Vector::Zero(static_cast<Eigen::Index>(mesh.num_nodes())));
  for (int i = 0; i < grid.steps; ++i) {
    traj.fields.push_back(solver.solve(explicit_part * traj.fields.back() + forcing));
  }
  return traj;
}

CloakProblem::CloakProblem(MaskedDomain domain, ProblemData data) : domain_(std::move(domain)), data_(data) {
  data_.validate();
  domain_.tags.require_control_layout();
  const auto& mesh = domain_.mesh;
  const auto& tags = domain_.tags;
  mass_ = assemble_mass(mesh);
  base_ = assemble_stiffness(mesh, data_.mu) + assemble_robin(mesh, tags.robin_boundary, data_.robin_sign, data_.alpha);
  load_ = assemble_load(mesh, data_.source);
  obs_mass_ = assemble_mass(mesh, tags.obs_elems);
  ctrl_mass_ = assemble_control_mass(mesh, tags);
  ctrl_stiff_ = assemble_control_stiffness(mesh, tags);
  b_u_ = assemble_control_tensor(mesh, tags, Direction::U);
  b_f_ = assemble_control_tensor(mesh, tags, Direction::L);
  b_v_ = assemble_control_tensor(mesh, tags, Direction::S);
  dirichlet_ = DirichletReduction(mesh.num_nodes(), domain_.dirichlet_nodes);
}

const ControlTensor& CloakProblem::tensor(Direction d) const {
  switch (d) {
    case Direction::U:
      return b_u_;
    case Direction::L:
      return b_f_;
    case Direction::S:
      return b_v_;
  }
  return b_v_;
}

SparseMatrix CloakProblem::system_matrix(const ControlField& ctrl) const {
  if (ctrl.size() != num_controls() || !ctrl.same_shape(ctrl)) {
    throw InvalidArgument("control field has " + std::to_string(ctrl.size()) + " nodes, expected " +
                          std::to_string(num_controls()));
  }
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(b_u_.num_entries() + b_f_.num_entries() + b_v_.num_entries());
  b_u_.contract_into(ctrl.u, trip);
  b_f_.contract_into(ctrl.f, trip);
  b_v_.contract_into(ctrl.v, trip);
  SparseMatrix c(base_.rows(), base_.cols());
  c.setFromTriplets(trip.begin(), trip.end());
  SparseMatrix s = base_ + c;
  s.makeCompressed();
  return s;
}

void CloakProblem::check_controls(const ControlField& ctrl) const {
  if (ctrl.size() != num_controls() || !ctrl.same_shape(ctrl)) {
    throw InvalidArgument("control field has wrong size");
  }
  const double mu = data_.mu;
  for (Eigen::Index k = 0; k < ctrl.u.size(); ++k) {
    const double a = mu + ctrl.u[k], d = mu + ctrl.f[k], b = ctrl.v[k];
    if (!(a + d > 0.0) || !(a * d - b * b > 0.0)) {
      throw DomainError("diffusivity is not positive definite at control node " + std::to_string(k));
    }
  }
}

Vector CloakProblem::initial_state() const {
  Vector q = Vector::Zero(static_cast<Eigen::Index>(num_state()));
  for (int v : domain_.dirichlet_nodes) q[v] = data_.T_o;
  return q;
}

SteadySolution solve_state_steady_factored(const CloakProblem& problem, const ControlField& ctrl) {
  problem.check_controls(ctrl);
  const auto& red = problem.dirichlet();
  const double t_o = problem.data().T_o;
  const auto sys = apply_dirichlet(problem.system_matrix(ctrl), problem.load(), red, t_o);
  SteadySolution out;
  out.solver = std::make_shared<const SymmetricSolver>(sys.matrix);
  out.state = red.expand(out.solver->solve(sys.rhs), t_o);
  return out;
}

Vector solve_state_steady(const CloakProblem& problem, const ControlField& ctrl) {
  return solve_state_steady_factored(problem, ctrl).state;
}

ThetaStepper::ThetaStepper(const CloakProblem& problem, double dt, double theta)
    : problem_(&problem), dt_(dt), theta_(theta) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidArgument("theta must lie in [0, 1]");
}

SparseMatrix ThetaStepper::implicit_matrix(const ControlField& ctrl) const {
  SparseMatrix a = problem_->mass() + theta_ * dt_ * problem_->system_matrix(ctrl);
  a.makeCompressed();
  return a;
}

Vector ThetaStepper::explicit_apply(const Vector& q, const ControlField& ctrl) const {
  Vector out = problem_->mass() * q;
  if (theta_ < 1.0) out -= (1.0 - theta_) * dt_ * (problem_->system_matrix(ctrl) * q);
  return out;
}

Vector ThetaStepper::step(const Vector& prev, const ControlField& ctrl_prev, const ControlField& ctrl_next) {
  if (static_cast<std::size_t>(prev.size()) != problem_->num_state()) {
    throw InvalidArgument("state vector has wrong length");
  }
  problem_->check_controls(ctrl_next);
  const auto& red = problem_->dirichlet();
  if (!solver_ || !(key_ == ctrl_next)) {
    implicit_full_ = implicit_matrix(ctrl_next);
    solver_ = std::make_shared<const SymmetricSolver>(red.reduce(implicit_full_));
    key_ = ctrl_next;
    ++factorizations_;
  }
  const double t_o = problem_->data().T_o;
  const Vector rhs = red.restrict_free(explicit_apply(prev, ctrl_prev) + dt_ * problem_->load()) +
                     red.lifting(implicit_full_, t_o);
  return red.expand(solver_->solve(rhs), t_o);
}

TransientSolution integrate_transient(const CloakProblem& problem, const ControlTrajectory& ctrl,
                                      const TimeGrid& grid) {
  grid.validate();
  if (ctrl.size() != static_cast<std::size_t>(grid.steps) + 1) {
    throw InvalidArgument("transient controls need N + 1 = " + std::to_string(grid.steps + 1) + " slices");
  }
  TransientSolution out;
  out.trajectory.times = grid.times();
  out.trajectory.fields.reserve(ctrl.size());
  out.trajectory.fields.push_back(problem.initial_state());
  out.step_solvers.resize(ctrl.size());

  ThetaStepper stepper(problem, grid.dt(), grid.theta);
  for (std::size_t i = 0; i + 1 < ctrl.size(); ++i) {
    out.trajectory.fields.push_back(stepper.step(out.trajectory.fields.back(), ctrl[i], ctrl[i + 1]));
    out.step_solvers[i + 1] = stepper.last_solver();
  }
  out.factorizations = stepper.factorizations();
  return out;
}

Trajectory solve_transient(const CloakProblem& problem, const ControlTrajectory& ctrl, const TimeGrid& grid) {
  return integrate_transient(problem, ctrl, grid).trajectory;
}

Trajectory restrict_trajectory(const RestrictionMap& map, const Trajectory& ref) {
  Trajectory out;
  out.times = ref.times;
  out.fields.reserve(ref.fields.size());
  for (const auto& z : ref.fields) out.fields.push_back(map.restrict(z));
  return out;
}

}  // namespace cloakopt
