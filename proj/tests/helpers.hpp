#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "cloakopt/linear_solver.hpp"
#include "cloakopt/scenario.hpp"

namespace testing {

using namespace cloakopt;

/// Structured square mesh with interior nodes moved by up to `jitter` cell
/// sizes in each direction.
inline TriMesh jittered_mesh(int cells, double side, double jitter, std::uint64_t seed) {
  const TriMesh base = build_square_mesh(side, side / cells);
  const double h = side / cells;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-jitter * h, jitter * h);
  auto nodes = base.nodes();
  const double edge = side / 2.0 - 1e-12;
  for (auto& p : nodes) {
    if (std::abs(p.x) < edge && std::abs(p.y) < edge) {
      p.x += d(rng);
      p.y += d(rng);
    }
  }
  return TriMesh(nodes, base.triangles(), base.boundary_edges());
}

/// Degree-5 Dunavant rule on the reference triangle: barycentric points and
/// weights summing to one.
struct QuadPoint {
  std::array<double, 3> bary;
  double weight;
};

inline std::array<QuadPoint, 7> dunavant5() {
  const double a1 = 0.059715871789770, b1 = 0.470142064105115;
  const double a2 = 0.797426985353087, b2 = 0.101286507323456;
  const double w0 = 0.225, w1 = 0.132394152788506, w2 = 0.125939180544827;
  return {{{{1.0 / 3, 1.0 / 3, 1.0 / 3}, w0},
           {{a1, b1, b1}, w1},
           {{b1, a1, b1}, w1},
           {{b1, b1, a1}, w1},
           {{a2, b2, b2}, w2},
           {{b2, a2, b2}, w2},
           {{b2, b2, a2}, w2}}};
}

/// Integral over triangle e of f(x, y, barycentric coordinates).
inline double integrate(const TriMesh& mesh, std::size_t e,
                        const std::function<double(double, double, const std::array<double, 3>&)>& f) {
  const auto p = mesh.corners(e);
  double sum = 0.0;
  for (const auto& q : dunavant5()) {
    const double x = q.bary[0] * p[0].x + q.bary[1] * p[1].x + q.bary[2] * p[2].x;
    const double y = q.bary[0] * p[0].y + q.bary[1] * p[1].y + q.bary[2] * p[2].y;
    sum += q.weight * f(x, y, q.bary);
  }
  return sum * mesh.area(e);
}

/// P1 value of a nodal field at barycentric coordinates of triangle e.
inline double p1_value(const TriMesh& mesh, std::size_t e, const Eigen::VectorXd& v, const std::array<double, 3>& b) {
  const auto& t = mesh.triangle(e);
  return b[0] * v[t[0]] + b[1] * v[t[1]] + b[2] * v[t[2]];
}

/// Small problem (121 nodes) with a disk obstacle, used across modules.
inline ScenarioConfig desk_config() {
  ScenarioConfig cfg;
  cfg.side = 2.0;
  cfg.h_max = 0.2;
  cfg.geometry = GeometrySpec{DiskShape{{0.0, 0.0}, 0.3}, 0.3, 0.0};
  cfg.data.source.center = {0.7, 0.0};
  cfg.data.source.radius = 0.2;
  return cfg;
}

inline ScenarioConfig desk_transient_config(int steps = 4, double theta = 1.0) {
  auto cfg = desk_config();
  cfg.regime = Regime::transient;
  cfg.grid.final_time = 1.0;
  cfg.grid.steps = steps;
  cfg.grid.theta = theta;
  return cfg;
}

/// Random controls with K safely positive definite.
inline ControlField random_controls(std::size_t n, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.0, scale), o(-0.5 * scale, 0.5 * scale);
  auto c = ControlField::zeros(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    c.u[i] = d(rng);
    c.f[i] = d(rng);
    c.v[i] = o(rng);
  }
  return c;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

/// L2 error of the P1 solution of -mu Lap z + Robin (mu dz/dn + alpha z = g)
/// for z* = x^2 + y^2 on [-1, 1]^2 with n x n cells.
inline double mms_steady_error(int cells, double mu = 1.0, double alpha = 1.0) {
  const TriMesh mesh = build_square_mesh(2.0, 2.0 / cells);
  auto exact = [](double x, double y) { return x * x + y * y; };
  const SparseMatrix a =
      assemble_stiffness(mesh, mu) + assemble_robin(mesh, BoundaryLabel::outer, +1, alpha);
  // -mu Lap z* = -4 mu everywhere.
  Vector rhs = assemble_load(mesh, SourceSpec{{0, 0}, 1.0, -4.0 * mu, true});
  // g = mu dz*/dn + alpha z*, integrated against the edge hats with 3-point Gauss.
  const double gp[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
  const double gw[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
  for (const auto& ed : mesh.boundary_edges()) {
    const auto& p0 = mesh.node(ed.nodes[0]);
    const auto& p1 = mesh.node(ed.nodes[1]);
    const double len = std::hypot(p1.x - p0.x, p1.y - p0.y);
    const double nx = (p1.y - p0.y) / len, ny = -(p1.x - p0.x) / len;  // outward for CCW boundary
    for (int q = 0; q < 3; ++q) {
      const double s = gp[q];
      const double x = (1 - s) * p0.x + s * p1.x, y = (1 - s) * p0.y + s * p1.y;
      const double g = mu * (2 * x * nx + 2 * y * ny) + alpha * exact(x, y);
      rhs[ed.nodes[0]] += gw[q] * len * g * (1 - s);
      rhs[ed.nodes[1]] += gw[q] * len * g * s;
    }
  }
  const Vector zh = SymmetricSolver(a).solve(rhs);
  double err2 = 0.0;
  for (std::size_t e = 0; e < mesh.num_triangles(); ++e) {
    err2 += integrate(mesh, e, [&](double x, double y, const std::array<double, 3>& b) {
      const double d = p1_value(mesh, e, zh, b) - exact(x, y);
      return d * d;
    });
  }
  return std::sqrt(err2);
}

/// Observed orders log2(e_i / e_{i+1}) of the manufactured solution over
/// `refinements` uniform refinements starting from `cells`.
inline std::vector<double> mms_orders(int cells, int refinements) {
  std::vector<double> err;
  for (int r = 0; r <= refinements; ++r) err.push_back(mms_steady_error(cells << r));
  std::vector<double> order;
  for (std::size_t i = 0; i + 1 < err.size(); ++i) order.push_back(std::log2(err[i] / err[i + 1]));
  return order;
}

/// Final-time M-norm error of the reference heat problem with N steps against
/// a run with N * 64 steps, on a fixed small mesh.
inline std::vector<double> temporal_orders(double theta, std::vector<int> steps, double final_time = 0.5) {
  const TriMesh mesh = build_square_mesh(2.0, 0.2);
  ProblemData data = ScenarioConfig::default_data();
  data.source.center = {0.3, 0.0};
  data.source.radius = 0.5;
  const SparseMatrix m = assemble_mass(mesh);
  TimeGrid fine{final_time, steps.front() * 64, theta, true};
  const Vector ref = solve_reference_transient(data, mesh, fine).fields.back();
  std::vector<double> err;
  for (int n : steps) {
    const Vector d = solve_reference_transient(data, mesh, TimeGrid{final_time, n, theta, true}).fields.back() - ref;
    err.push_back(std::sqrt(d.dot(m * d)));
  }
  std::vector<double> order;
  for (std::size_t i = 0; i + 1 < err.size(); ++i) {
    order.push_back(std::log(err[i] / err[i + 1]) / std::log(static_cast<double>(steps[i + 1]) / steps[i]));
  }
  return order;
}

inline double max_abs_diff(const Eigen::SparseMatrix<double>& a, const Eigen::SparseMatrix<double>& b) {
  return Eigen::MatrixXd(a - b).cwiseAbs().maxCoeff();
}

}  // namespace testing
