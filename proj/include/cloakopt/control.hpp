#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace cloakopt {

/// Nodal values of the three diffusivity perturbations on the cloak nodes:
/// K = [[mu + u, v], [v, mu + f]].
struct ControlField {
  Eigen::VectorXd u;
  Eigen::VectorXd f;
  Eigen::VectorXd v;

  static ControlField zeros(std::size_t n);
  static ControlField constant(std::size_t n, double u, double f, double v);

  std::size_t size() const { return static_cast<std::size_t>(u.size()); }
  bool same_shape(const ControlField& other) const;
  bool operator==(const ControlField& other) const;
};

/// Gradients share the layout of the controls they differentiate.
using GradientTriple = ControlField;

/// One ControlField per time node (a single slice in steady state).
using ControlTrajectory = std::vector<ControlField>;

/// [u_0; f_0; v_0; u_1; ...]
Eigen::VectorXd flatten(const ControlTrajectory& ctrl);
ControlTrajectory unflatten(const Eigen::VectorXd& x, std::size_t slices, std::size_t nodes);

}  // namespace cloakopt
