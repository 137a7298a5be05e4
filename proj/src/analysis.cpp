#include "cloakopt/analysis.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "cloakopt/errors.hpp"

namespace cloakopt {

namespace {

constexpr double kIsotropyTol = 1e-12;

double obs_area(const TriMesh& mesh, std::span<const std::size_t> obs) {
  double a = 0.0;
  for (std::size_t e : obs) a += mesh.area(e);
  return a;
}

double l2_squared(const SparseMatrix& m_obs, const Vector& a, const Vector& b) {
  const Vector d = a - b;
  return d.dot(m_obs * d);
}

}  // namespace

EigenField eigen_field(const ControlField& ctrl, double mu) {
  if (!ctrl.same_shape(ctrl)) throw InvalidArgument("eigen_field: inconsistent control shapes");
  const Eigen::Index n = ctrl.u.size();
  EigenField out{Vector(n), Vector(n), Vector(n), Vector(n)};
  constexpr double deg = 180.0 / std::numbers::pi;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double a = mu + ctrl.u[k], d = mu + ctrl.f[k], b = ctrl.v[k];
    const double mean = 0.5 * (a + d);
    const double half_diff = 0.5 * (a - d);
    const double r = std::hypot(half_diff, b);
    out.lambda1[k] = mean + r;
    out.lambda2[k] = mean - r;
    double angle = 0.0;
    if (std::abs(b) >= kIsotropyTol || std::abs(a - d) >= kIsotropyTol) {
      angle = 0.5 * std::atan2(2.0 * b, a - d) * deg;
      if (angle <= -90.0) angle += 180.0;
    }
    out.angle1[k] = angle;
    out.angle2[k] = angle > 0.0 ? angle - 90.0 : angle + 90.0;
  }
  return out;
}

Matrix2 reconstruct_diffusivity(const EigenField& eig, std::size_t node) {
  const auto k = static_cast<Eigen::Index>(node);
  const double t = eig.angle1[k] * std::numbers::pi / 180.0;
  const Eigen::Vector2d w1(std::cos(t), std::sin(t));
  const Eigen::Vector2d w2(-std::sin(t), std::cos(t));
  return eig.lambda1[k] * w1 * w1.transpose() + eig.lambda2[k] * w2 * w2.transpose();
}

double mte(const TriMesh& mesh, const Vector& q, const Vector& z, std::span<const std::size_t> obs_elems) {
  if (q.size() != z.size() || static_cast<std::size_t>(q.size()) != mesh.num_nodes()) {
    throw InvalidArgument("mte: field sizes do not match the mesh");
  }
  const double area = obs_area(mesh, obs_elems);
  if (!(area > 0.0)) throw DomainError("mte: observation region has zero area");
  return l2_squared(assemble_mass(mesh, obs_elems), q, z) / area;
}

double efficiency(double mte_uncontrolled, double mte_optimal) {
  if (!(mte_uncontrolled > 0.0)) throw DomainError("efficiency undefined for a zero uncontrolled tracking error");
  return std::abs(mte_uncontrolled - mte_optimal) / mte_uncontrolled;
}

double spacetime_norm(const TriMesh& mesh, const Trajectory& a, const Trajectory& b,
                      std::span<const std::size_t> obs_elems) {
  if (a.size() != b.size() || a.times.size() != a.size() || b.times != a.times) {
    throw InvalidArgument("spacetime_norm: trajectories are on different time grids");
  }
  const SparseMatrix m = assemble_mass(mesh, obs_elems);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    const double h = a.times[i + 1] - a.times[i];
    sum += 0.5 * h * (l2_squared(m, a.fields[i], b.fields[i]) + l2_squared(m, a.fields[i + 1], b.fields[i + 1]));
  }
  return sum;
}

std::vector<double> efficiency_history(const TriMesh& mesh, const Trajectory& uncontrolled, const Trajectory& optimal,
                                       const Trajectory& reference, std::span<const std::size_t> obs_elems) {
  if (uncontrolled.size() != optimal.size() || optimal.size() != reference.size()) {
    throw InvalidArgument("efficiency_history: trajectories differ in length");
  }
  std::vector<double> eta(reference.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double base = mte(mesh, uncontrolled.fields[i], reference.fields[i], obs_elems);
    if (base > 0.0) eta[i] = efficiency(base, mte(mesh, optimal.fields[i], reference.fields[i], obs_elems));
  }
  return eta;
}

ProlongationResult prolongate_controls(const ControlField& coarse, std::span<const int> coarse_cloak_nodes,
                                       const TriMesh& coarse_mesh, const RefinedMesh& refined,
                                       std::span<const int> fine_cloak_nodes) {
  if (coarse.size() != coarse_cloak_nodes.size() || !coarse.same_shape(coarse)) {
    throw InvalidArgument("prolongate_controls: coarse controls do not match the coarse cloak nodes");
  }
  std::vector<int> slot(coarse_mesh.num_nodes(), -1);
  for (std::size_t k = 0; k < coarse_cloak_nodes.size(); ++k) {
    slot[static_cast<std::size_t>(coarse_cloak_nodes[k])] = static_cast<int>(k);
  }

  ProlongationResult out;
  out.controls = ControlField::zeros(fine_cloak_nodes.size());
  for (std::size_t k = 0; k < fine_cloak_nodes.size(); ++k) {
    const auto& loc = refined.node_parent.at(static_cast<std::size_t>(fine_cloak_nodes[k]));
    const auto& tri = coarse_mesh.triangle(loc.coarse_triangle);
    double u = 0.0, f = 0.0, v = 0.0;
    bool supported = true;
    for (int c = 0; c < 3; ++c) {
      const double w = loc.weights[static_cast<std::size_t>(c)];
      if (w == 0.0) continue;
      const int s = slot[static_cast<std::size_t>(tri[c])];
      if (s < 0) {
        supported = false;
        break;
      }
      u += w * coarse.u[s];
      f += w * coarse.f[s];
      v += w * coarse.v[s];
    }
    const auto i = static_cast<Eigen::Index>(k);
    if (supported) {
      out.controls.u[i] = u;
      out.controls.f[i] = f;
      out.controls.v[i] = v;
    } else {
      ++out.zero_extended;
    }
  }
  return out;
}

}  // namespace cloakopt
