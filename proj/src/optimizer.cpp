#include "cloakopt/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>

#include "cloakopt/errors.hpp"

namespace cloakopt {

namespace {

double min_over(const std::vector<Vector>& v) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& x : v) {
    if (x.size() > 0) m = std::min(m, x.minCoeff());
  }
  return m;
}

struct BarrierPoint {
  Vector x;
  double cost = 0.0;
  double phi = 0.0;
  Vector grad;  // masked barrier gradient
  double min_g1 = 0.0;
  double min_g2 = 0.0;
};

/// Two-loop recursion for H * g.
Vector lbfgs_apply(const std::deque<std::pair<Vector, Vector>>& mem, const Vector& g) {
  Vector q = g;
  std::vector<double> alpha(mem.size());
  for (std::size_t i = mem.size(); i-- > 0;) {
    const auto& [s, y] = mem[i];
    alpha[i] = s.dot(q) / y.dot(s);
    q -= alpha[i] * y;
  }
  if (!mem.empty()) {
    const auto& [s, y] = mem.back();
    q *= s.dot(y) / y.dot(y);
  }
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const auto& [s, y] = mem[i];
    const double b = y.dot(q) / y.dot(s);
    q += (alpha[i] - b) * s;
  }
  return q;
}

}  // namespace

double ConstraintValues::min_g1() const { return min_over(g1); }
double ConstraintValues::min_g2() const { return min_over(g2); }

ConstraintValues eval_constraints(const ControlTrajectory& ctrl, double mu, double eps) {
  ConstraintValues out;
  out.g1.reserve(ctrl.size());
  out.g2.reserve(ctrl.size());
  for (const auto& c : ctrl) {
    if (!c.same_shape(c)) throw InvalidArgument("eval_constraints: inconsistent control shapes");
    const Vector a = (mu + c.u.array()).matrix();
    const Vector d = (mu + c.f.array()).matrix();
    out.g1.push_back((a + d).array() - eps);
    out.g2.push_back((a.array() * d.array() - c.v.array().square() - eps).matrix());
  }
  return out;
}

ConstraintValues eval_constraints(const ControlField& ctrl, double mu, double eps) {
  return eval_constraints(ControlTrajectory{ctrl}, mu, eps);
}

BarrierValue barrier_value_and_gradient(const ControlTrajectory& ctrl, double cost, const ControlTrajectory& cost_gradient,
                                        double mu_b, double mu, double eps, BarrierKind kind) {
  if (cost_gradient.size() != ctrl.size()) throw InvalidArgument("barrier: gradient/control slice mismatch");
  BarrierValue out{cost, cost_gradient};
  if (mu_b == 0.0) return out;
  if (!(mu_b > 0.0)) throw InvalidArgument("barrier parameter must be non-negative");
  const auto g = eval_constraints(ctrl, mu, eps);
  if (!g.strictly_feasible()) throw DomainError("log barrier evaluated at a point that is not strictly feasible");
  for (std::size_t s = 0; s < ctrl.size(); ++s) {
    const auto& c = ctrl[s];
    const auto& g1 = g.g1[s].array();
    const auto& g2 = g.g2[s].array();
    // w = -psi'(g): 1/g for -log g, 1/(g (1 + g)) for log(1 + 1/g).
    Vector w1, w2;
    if (kind == BarrierKind::log) {
      out.value -= mu_b * (g1.log().sum() + g2.log().sum());
      w1 = g1.inverse().matrix();
      w2 = g2.inverse().matrix();
    } else {
      out.value += mu_b * ((1.0 + g1.inverse()).log().sum() + (1.0 + g2.inverse()).log().sum());
      w1 = (g1 * (1.0 + g1)).inverse().matrix();
      w2 = (g2 * (1.0 + g2)).inverse().matrix();
    }
    // d g1 / d(u, f, v) = (1, 1, 0);  d g2 / d(u, f, v) = (mu + f, mu + u, -2 v).
    auto& d = out.gradient[s];
    d.u -= mu_b * (w1.array() + (mu + c.f.array()) * w2.array()).matrix();
    d.f -= mu_b * (w1.array() + (mu + c.u.array()) * w2.array()).matrix();
    d.v -= mu_b * (-2.0 * c.v.array() * w2.array()).matrix();
  }
  return out;
}

void OptimizeOptions::validate() const {
  if (max_outer_iterations < 1 || max_inner_iterations < 1) throw ConfigError("iteration limits must be positive");
  if (!(barrier_initial > 0.0) || !(barrier_final > 0.0) || barrier_final > barrier_initial) {
    throw ConfigError("barrier schedule must satisfy 0 < final <= initial");
  }
  if (!(barrier_shrink > 0.0 && barrier_shrink < 1.0)) throw ConfigError("barrier shrink factor must lie in (0, 1)");
  if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) throw ConfigError("Armijo constant must lie in (0, 1)");
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) throw ConfigError("backtrack factor must lie in (0, 1)");
  if (max_backtracks < 1) throw ConfigError("max_backtracks must be positive");
  if (!(gradient_tolerance >= 0.0)) throw ConfigError("gradient tolerance must be non-negative");
  if (!(initial_step_fraction > 0.0)) throw ConfigError("initial step fraction must be positive");
  if (lbfgs_memory < 1) throw ConfigError("L-BFGS memory must be positive");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::converged:
      return "converged";
    case Termination::iteration_limit:
      return "iteration_limit";
    case Termination::line_search_failure:
      return "line_search_failure";
  }
  return "unknown";
}

OptimizeResult optimize(Objective& objective, ControlTrajectory init, const OptimizeOptions& opts, double eps,
                        const std::vector<bool>& frozen_slices) {
  opts.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t slices = objective.num_slices();
  const std::size_t nodes = objective.nodes_per_slice();
  const double mu = objective.mu();
  if (init.size() != slices) throw InvalidArgument("initial guess has the wrong number of slices");
  for (const auto& c : init) {
    if (c.size() != nodes || !c.same_shape(c)) throw InvalidArgument("initial guess has the wrong number of nodes");
  }
  if (!eval_constraints(init, mu, eps).strictly_feasible()) {
    throw DomainError("initial guess is not strictly feasible");
  }
  if (!frozen_slices.empty() && frozen_slices.size() != slices) {
    throw InvalidArgument("frozen slice mask has the wrong length");
  }

  Vector mask = Vector::Ones(static_cast<Eigen::Index>(3 * nodes * slices));
  for (std::size_t s = 0; s < frozen_slices.size(); ++s) {
    if (frozen_slices[s]) {
      mask.segment(static_cast<Eigen::Index>(3 * nodes * s), static_cast<Eigen::Index>(3 * nodes)).setZero();
    }
  }

  OptimizeResult result;
  auto& report = result.report;

  auto evaluate = [&](const Vector& x, double mu_b) {
    const auto ctrl = unflatten(x, slices, nodes);
    const auto ev = objective.value_and_gradient(ctrl);
    ++report.evaluations;
    const auto bv = barrier_value_and_gradient(ctrl, ev.value, ev.gradient, mu_b, mu, eps, opts.barrier);
    const auto g = eval_constraints(ctrl, mu, eps);
    BarrierPoint p;
    p.x = x;
    p.cost = ev.value;
    p.phi = bv.value;
    p.grad = flatten(bv.gradient).cwiseProduct(mask);
    p.min_g1 = g.min_g1();
    p.min_g2 = g.min_g2();
    return p;
  };

  auto strictly_feasible = [&](const Vector& x) {
    return eval_constraints(unflatten(x, slices, nodes), mu, eps).strictly_feasible();
  };

  Vector x = flatten(init);
  double mu_b = opts.barrier_initial;
  Termination reason = Termination::iteration_limit;
  bool done = false;

  for (int stage = 0; stage < opts.max_outer_iterations && !done; ++stage) {
    const bool last_stage = mu_b <= opts.barrier_final * (1.0 + 1e-12) || stage + 1 == opts.max_outer_iterations;
    BarrierPoint cur = evaluate(x, mu_b);
    std::deque<std::pair<Vector, Vector>> memory;
    double bb_step = 0.0;
    int stall = 0;
    bool stage_converged = false;
    bool line_search_failed = false;

    for (int it = 0;; ++it) {
      const double gnorm = cur.grad.norm();
      report.history.push_back({stage, it, cur.cost, cur.phi, gnorm, cur.min_g1, cur.min_g2, mu_b});
      if (opts.log) {
        *opts.log << "iter=" << report.history.size() - 1 << " J=" << cur.cost << " grad=" << gnorm
                  << " ming1=" << cur.min_g1 << " ming2=" << cur.min_g2 << " mu_b=" << mu_b << '\n';
      }
      if (gnorm <= opts.gradient_tolerance || stall >= opts.stall_iterations) {
        stage_converged = true;
        break;
      }
      if (it >= opts.max_inner_iterations) break;

      Vector d;
      if (opts.direction == SearchDirection::lbfgs && !memory.empty()) {
        d = -lbfgs_apply(memory, cur.grad);
      } else {
        d = -cur.grad;
      }
      double slope = cur.grad.dot(d);
      if (!(slope < 0.0)) {
        memory.clear();
        d = -cur.grad;
        slope = -gnorm * gnorm;
      }

      double alpha;
      if (opts.direction == SearchDirection::lbfgs && !memory.empty()) {
        alpha = 1.0;
      } else if (bb_step > 0.0) {
        alpha = bb_step;
      } else {
        alpha = opts.initial_step_fraction * mu / d.cwiseAbs().maxCoeff();
      }

      bool accepted = false;
      BarrierPoint trial;
      for (int bt = 0; bt < opts.max_backtracks; ++bt, alpha *= opts.backtrack_factor) {
        const Vector xt = cur.x + alpha * d;
        if (!strictly_feasible(xt)) continue;
        try {
          trial = evaluate(xt, mu_b);
        } catch (const SolverError&) {
          continue;
        } catch (const DomainError&) {
          continue;
        }
        if (trial.phi < cur.phi && trial.phi <= cur.phi + opts.armijo_c1 * alpha * slope) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        line_search_failed = true;
        break;
      }

      const Vector s = trial.x - cur.x;
      const Vector y = trial.grad - cur.grad;
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        memory.emplace_back(s, y);
        if (static_cast<int>(memory.size()) > opts.lbfgs_memory) memory.pop_front();
        bb_step = s.dot(s) / sy;
      } else {
        bb_step = 0.0;
      }
      const double rel = (cur.phi - trial.phi) / std::max(std::abs(cur.phi), 1e-300);
      stall = rel < opts.stall_tolerance ? stall + 1 : 0;
      cur = std::move(trial);
    }

    x = cur.x;
    if (line_search_failed) {
      reason = Termination::line_search_failure;
      done = true;
    } else if (last_stage) {
      reason = stage_converged ? Termination::converged : Termination::iteration_limit;
      done = true;
    }
    mu_b = std::max(mu_b * opts.barrier_shrink, opts.barrier_final);
  }

  report.reason = reason;
  result.controls = unflatten(x, slices, nodes);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace cloakopt
