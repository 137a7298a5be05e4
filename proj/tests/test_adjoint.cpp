#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "cloakopt/errors.hpp"
#include "helpers.hpp"

using namespace cloakopt;

namespace {

// Obstacle-free problem: cloak on the left half, observation on the right.
std::unique_ptr<CloakProblem> split_problem(const TriMesh& mesh, ProblemData data) {
  std::vector<Region> regions(mesh.num_triangles());
  for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
    regions[e] = mesh.centroid(e).x < 0.0 ? Region::cloak : Region::observation;
  }
  return std::make_unique<CloakProblem>(mask_obstacle(mesh, RegionTags::from_regions(mesh, regions)), data);
}

ProblemData strong_weights() {
  ProblemData d;
  d.source = SourceSpec{{0, 0}, 1.0, 3.0, true};
  d.beta = 0.3;
  d.beta_g = 0.2;
  d.xi = 0.5;
  d.xi_g = 0.1;
  d.gamma = 0.7;
  d.gamma_g = 0.4;
  return d;
}

Scenario desk_scenario(bool transient, double theta = 1.0, bool include_final = true) {
  auto cfg = transient ? testing::desk_transient_config(4, theta) : testing::desk_config();
  cfg.grid.include_final = include_final;
  return build_scenario(cfg);
}

// Central difference of the objective along direction h.
double directional_fd(Objective& obj, const ControlTrajectory& c, const Eigen::VectorXd& h, double tau) {
  const Eigen::VectorXd x = flatten(c);
  const auto s = obj.num_slices(), n = obj.nodes_per_slice();
  return (obj.value(unflatten(x + tau * h, s, n)) - obj.value(unflatten(x - tau * h, s, n))) / (2 * tau);
}

}  // namespace

TEST_SUITE("adjoint") {

TEST_CASE("cost examples") {
  const auto p = split_problem(build_square_mesh(2.0, 0.4), strong_weights());
  const auto n = static_cast<Eigen::Index>(p->num_state());
  const Vector q = testing::random_vector(n, 1), z = testing::random_vector(n, 2);
  const auto zero = ControlField::zeros(p->num_controls());
  CHECK(eval_cost(*p, q, q, zero) == 0.0);
  CHECK(eval_cost(*p, q, z, zero) == doctest::Approx(0.5 * (q - z).dot(p->observation_mass() * (q - z))));
  CHECK_THROWS_AS(eval_cost(*p, q, Vector(z.head(n - 1)), zero), InvalidArgument);
}

TEST_CASE("cost agrees with a quadrature oracle") {
  const auto mesh = testing::jittered_mesh(5, 2.0, 0.25, 3);
  const auto p = split_problem(mesh, strong_weights());
  const auto& tags = p->tags();
  const auto n = static_cast<Eigen::Index>(p->num_state());
  const Vector q = testing::random_vector(n, 4), z = testing::random_vector(n, 5);
  const auto c = testing::random_controls(p->num_controls(), 6);

  // Nodal control values as full-mesh vectors.
  auto full = [&](const Vector& cv) {
    Vector out = Vector::Zero(n);
    for (std::size_t k = 0; k < tags.cloak_nodes.size(); ++k) out[tags.cloak_nodes[k]] = cv[static_cast<Eigen::Index>(k)];
    return out;
  };
  const auto& d = p->data();
  double oracle = 0.0;
  for (auto e : tags.obs_elems) {
    oracle += 0.5 * testing::integrate(mesh, e, [&](double, double, const auto& b) {
      const double r = testing::p1_value(mesh, e, q, b) - testing::p1_value(mesh, e, z, b);
      return r * r;
    });
  }
  const std::pair<const Vector*, std::pair<double, double>> parts[] = {
      {&c.u, {d.beta, d.beta_g}}, {&c.f, {d.xi, d.xi_g}}, {&c.v, {d.gamma, d.gamma_g}}};
  for (const auto& [cv, w] : parts) {
    const Vector cf = full(*cv);
    for (auto e : tags.cloak_elems) {
      const auto g = basis_gradients(mesh, e);
      const auto& t = mesh.triangle(e);
      const Eigen::Vector2d grad = cf[t[0]] * g[0] + cf[t[1]] * g[1] + cf[t[2]] * g[2];
      oracle += 0.5 * testing::integrate(mesh, e, [&](double, double, const auto& b) {
        const double val = testing::p1_value(mesh, e, cf, b);
        return w.first * val * val + w.second * grad.squaredNorm();
      });
    }
  }
  CHECK(eval_cost(*p, q, z, c) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("steady adjoint examples") {
  auto sc = desk_scenario(false);
  const auto& p = *sc.problem;
  const auto c = testing::random_controls(p.num_controls(), 7);
  const Vector q = solve_state_steady(p, c);

  CHECK(solve_adjoint_steady(p, q, q, c).cwiseAbs().maxCoeff() == 0.0);

  // S is symmetric: the adjoint equals a state-operator solve with the misfit load.
  const Vector padj = solve_adjoint_steady(p, q, sc.z_ocp, c);
  const auto& red = p.dirichlet();
  const auto sys = apply_dirichlet(p.system_matrix(c), p.observation_mass() * (q - sc.z_ocp), red, 0.0);
  const Vector pstate = red.expand(SymmetricSolver(sys.matrix).solve(sys.rhs), 0.0);
  CHECK((padj - pstate).cwiseAbs().maxCoeff() <= 1e-12 * pstate.cwiseAbs().maxCoeff());
  for (int v : p.domain().dirichlet_nodes) CHECK(padj[v] == 0.0);

  // The factorization-reusing variant gives the same field.
  const auto st = solve_state_steady_factored(p, c);
  const Vector preuse = solve_adjoint_steady(p, *st.solver, st.state, sc.z_ocp);
  CHECK((padj - preuse).cwiseAbs().maxCoeff() <= 1e-12 * padj.cwiseAbs().maxCoeff());
}

TEST_CASE("p = 0 leaves only the regularization gradient") {
  const auto p = split_problem(build_square_mesh(2.0, 0.4), strong_weights());
  const auto n = static_cast<Eigen::Index>(p->num_state());
  const auto c = testing::random_controls(p->num_controls(), 8);
  const auto g = eval_gradient(*p, testing::random_vector(n, 9), Vector::Zero(n), c);
  const auto r = regularization_gradient(*p, c);
  CHECK((g.u - r.u).norm() == 0.0);
  CHECK((g.f - r.f).norm() == 0.0);
  CHECK((g.v - r.v).norm() == 0.0);
  CHECK(g.u.isApprox(p->data().beta * (p->control_mass() * c.u) + p->data().beta_g * (p->control_stiffness() * c.u)));
}

TEST_CASE("steady directional derivative matches finite differences") {
  auto sc = desk_scenario(false);
  auto obj = sc.objective();
  const auto c = audit_point(sc, 3);
  const auto ev = obj->value_and_gradient(c);
  for (std::uint64_t seed = 10; seed < 13; ++seed) {
    const Eigen::VectorXd h = testing::random_vector(flatten(c).size(), seed);
    const double adj = flatten(ev.gradient).dot(h);
    const double fd = directional_fd(*obj, c, h, 1e-5);
    CHECK(std::abs(fd - adj) <= 1e-6 * std::abs(adj));
  }
}

TEST_CASE("transient adjoint vanishes when q equals z") {
  auto sc = desk_scenario(true);
  const auto& p = *sc.problem;
  const auto c = audit_point(sc, 4);
  const auto fwd = integrate_transient(p, c, sc.config.grid);
  const auto adj = solve_adjoint_transient(p, fwd, fwd.trajectory, c, sc.config.grid);
  for (const auto& f : adj.fields) CHECK(f.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single step gradient equals forward sensitivities") {
  // 5-node mesh: square with a centre node, two cloak and two observation triangles.
  const TriMesh mesh({{-1, -1}, {1, -1}, {1, 1}, {-1, 1}, {0, 0}}, {{0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}},
                     {{{0, 1}, BoundaryLabel::outer},
                      {{1, 2}, BoundaryLabel::outer},
                      {{2, 3}, BoundaryLabel::outer},
                      {{3, 0}, BoundaryLabel::outer}});
  const auto tags = RegionTags::from_regions(mesh, {Region::cloak, Region::cloak, Region::observation, Region::observation});
  const CloakProblem p(mask_obstacle(mesh, tags), strong_weights());
  REQUIRE(p.num_controls() == 4);

  for (double theta : {1.0, 0.5}) {
    for (bool include_final : {true, false}) {
      CAPTURE(theta);
      CAPTURE(include_final);
      const TimeGrid grid{0.7, 1, theta, include_final};
      const double dt = grid.dt();
      const ControlTrajectory c{testing::random_controls(4, 20), testing::random_controls(4, 21)};
      const Trajectory z{grid.times(), {testing::random_vector(5, 22), testing::random_vector(5, 23)}};
      const auto fwd = integrate_transient(p, c, grid);
      const auto adj = solve_adjoint_transient(p, fwd, z, c, grid);
      const auto grad = eval_gradient(p, fwd.trajectory, adj, c, grid);

      // Unrolled: q1 = A+^{-1}(A-(c0) q0 + dt F) with q0 = 0, so c0 enters only
      // through its regularization, and dq1/dc1_k = -A+^{-1} theta dt B_k q1.
      const Eigen::MatrixXd ap = Eigen::MatrixXd(p.mass()) + theta * dt * Eigen::MatrixXd(p.system_matrix(c[1]));
      const Eigen::VectorXd q1 = ap.ldlt().solve(dt * p.load());
      CHECK((q1 - fwd.trajectory.fields[1]).norm() <= 1e-13 * q1.norm());
      const Eigen::MatrixXd mobs = p.observation_mass();
      const auto reg0 = regularization_gradient(p, c[0]);
      const auto reg1 = regularization_gradient(p, c[1]);
      for (auto d : {Direction::U, Direction::L, Direction::S}) {
        const auto& b = p.tensor(d);
        for (std::size_t k = 0; k < 4; ++k) {
          const Eigen::VectorXd dq = -ap.ldlt().solve(theta * dt * (Eigen::MatrixXd(b.slice(k)) * q1));
          const auto ki = static_cast<Eigen::Index>(k);
          auto pick = [&](const ControlField& cf) {
            return d == Direction::U ? cf.u[ki] : d == Direction::L ? cf.f[ki] : cf.v[ki];
          };
          const double g1 = include_final ? dt * (pick(reg1) + (q1 - z.fields[1]).dot(mobs * dq)) : 0.0;
          const double g0 = include_final ? 0.0 : dt * pick(reg0);
          CHECK(pick(grad[1]) == doctest::Approx(g1).epsilon(1e-12).scale(1e-14));
          CHECK(pick(grad[0]) == doctest::Approx(g0).epsilon(1e-12).scale(1e-14));
        }
      }
    }
  }
}

TEST_CASE("transient gradient matches finite differences") {
  for (double theta : {1.0, 0.5}) {
    for (bool include_final : {true, false}) {
      CAPTURE(theta);
      CAPTURE(include_final);
      auto sc = desk_scenario(true, theta, include_final);
      const auto audit = audit_gradient(sc, audit_point(sc, 5), 10, 1e-3, 1e-5, 5);
      CHECK(audit.entries.size() == 10);
      CHECK(audit.max_rel_error <= 1e-5);
      CHECK(audit.v_shaped);
    }
  }
}

TEST_CASE("steady gradient matches finite differences with a V-shaped step curve") {
  auto sc = desk_scenario(false);
  const auto audit = audit_gradient(sc, audit_point(sc, 6), 12, 1e-3, 1e-5, 6);
  CHECK(audit.entries.size() == 12);
  CHECK(audit.max_rel_error <= 1e-5);
  CHECK(audit.v_shaped);
  CHECK(audit.passed);
}

TEST_CASE("forward and adjoint operators are exact transposes") {
  auto sc = desk_scenario(true, 0.5);
  const auto& p = *sc.problem;
  const auto c = testing::random_controls(p.num_controls(), 30);
  ThetaStepper stepper(p, 0.25, 0.5);
  const SparseMatrix ap = stepper.implicit_matrix(c);
  CHECK(testing::max_abs_diff(ap, SparseMatrix(ap.transpose())) == 0.0);
  const SparseMatrix s = p.system_matrix(c);
  CHECK(testing::max_abs_diff(s, SparseMatrix(s.transpose())) == 0.0);
  // The explicit operator applied by the adjoint recursion is A-^T.
  const Vector x = testing::random_vector(static_cast<Eigen::Index>(p.num_state()), 31);
  const SparseMatrix am = p.mass() - 0.5 * 0.25 * s;
  CHECK((stepper.explicit_apply(x, c) - SparseMatrix(am.transpose()) * x).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("gradient has one entry per cloak node and time slice") {
  auto sc = desk_scenario(true);
  auto obj = sc.objective();
  const auto ev = obj->value_and_gradient(audit_point(sc, 7));
  REQUIRE(ev.gradient.size() == 5);
  for (const auto& g : ev.gradient) {
    CHECK(g.size() == sc.problem->num_controls());
    CHECK(g.u.allFinite());
    CHECK(g.f.allFinite());
    CHECK(g.v.allFinite());
  }
  // With backward Euler and the final node included, slice 0 has no influence.
  CHECK(ev.gradient[0].u.norm() == 0.0);
  CHECK(sc.frozen_slices()[0]);
}

TEST_CASE("negative gradient is a descent direction") {
  for (bool transient : {false, true}) {
    auto sc = desk_scenario(transient);
    auto obj = sc.objective();
    const auto c = audit_point(sc, 8);
    const auto ev = obj->value_and_gradient(c);
    const Eigen::VectorXd g = flatten(ev.gradient);
    const double tau = 1e-3 / g.cwiseAbs().maxCoeff() * 0.1;
    const auto moved = unflatten(flatten(c) - tau * g, c.size(), c[0].size());
    CHECK(obj->value(moved) < ev.value);
  }
}

}  // TEST_SUITE
