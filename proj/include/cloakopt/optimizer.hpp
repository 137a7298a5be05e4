#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "cloakopt/adjoint.hpp"
#include "cloakopt/control.hpp"

namespace cloakopt {

/// Pointwise positive-definiteness margins of K = [[mu+u, v], [v, mu+f]]:
///   g1 = 2 mu + u + f - eps,   g2 = (mu + u)(mu + f) - v^2 - eps.
/// One vector per time slice.
struct ConstraintValues {
  std::vector<Vector> g1;
  std::vector<Vector> g2;

  double min_g1() const;
  double min_g2() const;
  bool feasible() const { return min_g1() >= 0.0 && min_g2() >= 0.0; }
  bool strictly_feasible() const { return min_g1() > 0.0 && min_g2() > 0.0; }
};

ConstraintValues eval_constraints(const ControlTrajectory& ctrl, double mu, double eps);
ConstraintValues eval_constraints(const ControlField& ctrl, double mu, double eps);

struct BarrierValue {
  double value = 0.0;
  ControlTrajectory gradient;
};

/// Barrier function psi applied to each constraint value g.
///   log:      psi(g) = -log g
///   bounded:  psi(g) = log(1 + 1/g), which behaves like -log g near the
///             constraint but decays to zero far inside it. The feasible set
///             is unbounded, so with the plain logarithm Phi has no lower
///             bound once J flattens out.
enum class BarrierKind { log, bounded };

/// Phi = J + mu_b sum psi(g1) + mu_b sum psi(g2) and its gradient. Throws
/// DomainError unless every constraint is strictly positive (mu_b > 0).
BarrierValue barrier_value_and_gradient(const ControlTrajectory& ctrl, double cost, const ControlTrajectory& cost_gradient,
                                        double mu_b, double mu, double eps, BarrierKind kind = BarrierKind::log);

enum class SearchDirection { steepest_descent, lbfgs };

struct OptimizeOptions {
  /// Cap on the number of barrier stages.
  int max_outer_iterations = 20;
  double barrier_initial = 1e-2;
  double barrier_shrink = 0.1;
  double barrier_final = 1e-8;
  int max_inner_iterations = 200;
  double gradient_tolerance = 1e-7;
  /// A stage also ends after `stall_iterations` consecutive accepted steps
  /// with relative decrease of Phi below this value.
  double stall_tolerance = 1e-9;
  int stall_iterations = 5;
  double armijo_c1 = 1e-4;
  double backtrack_factor = 0.5;
  int max_backtracks = 40;
  /// Largest nodal change of the first trial step in a stage, as a multiple
  /// of mu.
  double initial_step_fraction = 0.1;
  SearchDirection direction = SearchDirection::lbfgs;
  BarrierKind barrier = BarrierKind::bounded;
  int lbfgs_memory = 10;
  /// Progress lines go to this stream when set.
  std::ostream* log = nullptr;

  /// Throws ConfigError.
  void validate() const;
};

struct IterateRecord {
  int stage = 0;
  int iteration = 0;
  double cost = 0.0;
  double barrier = 0.0;
  double gradient_norm = 0.0;
  double min_g1 = 0.0;
  double min_g2 = 0.0;
  double mu_b = 0.0;
};

enum class Termination { converged, iteration_limit, line_search_failure };

std::string to_string(Termination t);

struct OptimizeReport {
  std::vector<IterateRecord> history;
  Termination reason = Termination::converged;
  double wall_seconds = 0.0;
  std::size_t evaluations = 0;
};

struct OptimizeResult {
  ControlTrajectory controls;
  OptimizeReport report;
};

/// Log-barrier interior-point loop. Each inner iteration solves state and
/// adjoint, builds a descent direction (steepest descent or L-BFGS on the
/// barrier function) and backtracks until the trial point is strictly
/// feasible and satisfies the Armijo condition. Slices listed as frozen are
/// kept at their initial value.
OptimizeResult optimize(Objective& objective, ControlTrajectory init, const OptimizeOptions& opts, double eps,
                        const std::vector<bool>& frozen_slices = {});

}  // namespace cloakopt
